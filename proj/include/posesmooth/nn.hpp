#pragma once

#include <Eigen/Core>

#include <random>
#include <vector>

namespace posesmooth::nn
{
// Activations are channels x (batch * time), sample-major: column
// n * T + t holds time step t of sample n.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Mode { train, eval };

// ------------------------------------------------------------------ conv1d
//
// weight is out x (kernel * in), tap-major: column j * in + i multiplies
// input channel i at tap j. Bias may be empty.
struct ConvParams
{
   Matrix weight;
   Vector bias;
};

struct ConvGeometry
{
   int kernel   = 1;
   int dilation = 1;
   int stride   = 1;

   int output_length(int input_length) const noexcept
   {
      const int span = (kernel - 1) * dilation + 1;
      return input_length < span ? 0 : (input_length - span) / stride + 1;
   }
};

// out[c, t] = bias[c] + sum_{i,j} w[c, i, j] * in[i, t * stride + j * dilation]
// `columns` receives the unfolded input when non-null (needed by backward).
Matrix conv1d_forward(const Matrix& input,
                      int batch,
                      const ConvParams& p,
                      const ConvGeometry& g,
                      Matrix* columns = nullptr);

// Accumulates into grad (same shapes as p); returns the input gradient.
Matrix conv1d_backward(const Matrix& d_out,
                       const Matrix& columns,
                       int batch,
                       int input_length,
                       const ConvParams& p,
                       const ConvGeometry& g,
                       ConvParams& grad);

// Single-sample convenience form, kernel given as out x in x k.
Matrix conv1d_forward(const Matrix& input,
                      const std::vector<Matrix>& kernel_taps, // k of out x in
                      const Vector& bias,
                      int dilation);

// ------------------------------------------------------------------ batchnorm
//
struct BatchNormParams
{
   Vector scale, shift;
};

struct BatchNormStats
{
   Vector mean, var;
   double momentum = 0.1;
   double eps      = 1e-5;
};

struct BatchNormCache
{
   Matrix normalized;
   Vector inv_std;
   Mode mode = Mode::eval;
};

// Train mode uses batch statistics over all columns and updates `stats`
// (unbiased variance into the running estimate); eval mode uses `stats`.
Matrix batchnorm_forward(const Matrix& input,
                         const BatchNormParams& p,
                         BatchNormStats& stats,
                         Mode mode,
                         BatchNormCache* cache = nullptr);

Matrix batchnorm_backward(const Matrix& d_out,
                          const BatchNormParams& p,
                          const BatchNormCache& cache,
                          BatchNormParams& grad);

// ------------------------------------------------------------------ dropout
//
// Inverted dropout. Returns the multiplicative mask (0 or 1/(1-p)); in eval
// mode or with p == 0 the mask is empty and the input passes unchanged.
Matrix dropout_mask(Eigen::Index rows,
                    Eigen::Index cols,
                    double rate,
                    Mode mode,
                    std::mt19937_64& rng);

Matrix dropout(const Matrix& input,
               double rate,
               std::mt19937_64& rng,
               Mode mode);

// ------------------------------------------------------------------ adam
//
struct AdamConfig
{
   double beta1 = 0.9;
   double beta2 = 0.999;
   double eps   = 1e-8;
};

struct AdamState
{
   std::vector<Vector> m, v;
   long step = 0;
};

using ParamView = Eigen::Map<Vector>;

// Biased first/second moments with bias correction.
void adam_step(std::vector<ParamView>& params,
               const std::vector<ParamView>& grads,
               AdamState& state,
               double lr,
               const AdamConfig& cfg = {});

} // namespace posesmooth::nn
