#include "posesmooth/nn.hpp"
#include "posesmooth/norm_stats.hpp"
#include "posesmooth/error.hpp"

#include <cmath>

namespace posesmooth
{
// ------------------------------------------------------------------ NormStats
//
void NormStats::fit(const Eigen::MatrixXd& samples,
                    Eigen::VectorXd& mean,
                    Eigen::VectorXd& std)
{
   if(samples.rows() == 0)
      throw ValidationError("cannot fit normalisation on zero samples");
   mean = samples.colwise().mean().transpose();
   std  = ((samples.rowwise() - mean.transpose()).array().square().colwise().mean())
             .sqrt()
             .transpose();
   std = std.cwiseMax(k_min_std);
}

Eigen::MatrixXd NormStats::standardize_outputs(const Eigen::MatrixXd& rows) const
{
   return (rows.rowwise() - output_mean.transpose()).array().rowwise()
          / output_std.transpose().array();
}

Eigen::MatrixXd
NormStats::destandardize_outputs(const Eigen::MatrixXd& rows) const
{
   return (rows.array().rowwise() * output_std.transpose().array()).matrix()
              .rowwise()
          + output_mean.transpose();
}

namespace nn
{
// ------------------------------------------------------------------ conv1d
//
Matrix conv1d_forward(const Matrix& input,
                      int batch,
                      const ConvParams& p,
                      const ConvGeometry& g,
                      Matrix* columns)
{
   const Eigen::Index in_ch = input.rows();
   if(batch < 1 || input.cols() % batch != 0)
      throw ValidationError("conv1d: columns are not a multiple of the batch");
   if(p.weight.cols() != g.kernel * in_ch)
      throw ValidationError("conv1d: weight shape does not match input channels");
   const int t_in  = int(input.cols() / batch);
   const int t_out = g.output_length(t_in);
   if(t_out < 1)
      throw ValidationError("conv1d: window too short for receptive field");

   Matrix out;
   if(g.kernel == 1 && g.stride == 1) {
      out = p.weight * input;
      if(columns) *columns = input;
   } else {
      Matrix col(g.kernel * in_ch, Eigen::Index(batch) * t_out);
      for(int n = 0; n < batch; ++n)
         for(int t = 0; t < t_out; ++t)
            for(int j = 0; j < g.kernel; ++j)
               col.block(j * in_ch, Eigen::Index(n) * t_out + t, in_ch, 1)
                   = input.col(Eigen::Index(n) * t_in + t * g.stride
                               + j * g.dilation);
      out = p.weight * col;
      if(columns) *columns = std::move(col);
   }
   if(p.bias.size() > 0) out.colwise() += p.bias;
   return out;
}

Matrix conv1d_backward(const Matrix& d_out,
                       const Matrix& columns,
                       int batch,
                       int input_length,
                       const ConvParams& p,
                       const ConvGeometry& g,
                       ConvParams& grad)
{
   grad.weight.noalias() += d_out * columns.transpose();
   if(p.bias.size() > 0) grad.bias += d_out.rowwise().sum();

   Matrix d_col = p.weight.transpose() * d_out;
   if(g.kernel == 1 && g.stride == 1) return d_col;

   const Eigen::Index in_ch = p.weight.cols() / g.kernel;
   const int t_out          = int(d_out.cols() / batch);
   Matrix d_in = Matrix::Zero(in_ch, Eigen::Index(batch) * input_length);
   for(int n = 0; n < batch; ++n)
      for(int t = 0; t < t_out; ++t)
         for(int j = 0; j < g.kernel; ++j)
            d_in.col(Eigen::Index(n) * input_length + t * g.stride
                     + j * g.dilation)
                += d_col.block(j * in_ch, Eigen::Index(n) * t_out + t, in_ch, 1);
   return d_in;
}

Matrix conv1d_forward(const Matrix& input,
                      const std::vector<Matrix>& kernel_taps,
                      const Vector& bias,
                      int dilation)
{
   if(kernel_taps.empty()) throw ValidationError("conv1d: empty kernel");
   const Eigen::Index out_ch = kernel_taps.front().rows();
   const Eigen::Index in_ch  = kernel_taps.front().cols();
   ConvParams p;
   p.weight.resize(out_ch, in_ch * Eigen::Index(kernel_taps.size()));
   for(size_t j = 0; j < kernel_taps.size(); ++j)
      p.weight.middleCols(Eigen::Index(j) * in_ch, in_ch) = kernel_taps[j];
   p.bias = bias;
   return conv1d_forward(input, 1, p, {int(kernel_taps.size()), dilation, 1});
}

// ------------------------------------------------------------------ batchnorm
//
Matrix batchnorm_forward(const Matrix& input,
                         const BatchNormParams& p,
                         BatchNormStats& stats,
                         Mode mode,
                         BatchNormCache* cache)
{
   const Eigen::Index n = input.cols();
   Vector mean, var;
   if(mode == Mode::train) {
      if(n < 2)
         throw ValidationError("batchnorm: train mode needs at least 2 samples");
      mean = input.rowwise().mean();
      var  = (input.colwise() - mean).array().square().rowwise().mean();
      stats.mean = (1.0 - stats.momentum) * stats.mean + stats.momentum * mean;
      stats.var  = (1.0 - stats.momentum) * stats.var
                  + stats.momentum * var * (double(n) / double(n - 1));
   } else {
      mean = stats.mean;
      var  = stats.var;
   }
   const Vector inv_std = (var.array() + stats.eps).rsqrt();
   Matrix normalized    = (input.colwise() - mean).array().colwise()
                       * inv_std.array();
   Matrix out = (normalized.array().colwise() * p.scale.array()).matrix();
   out.colwise() += p.shift;
   if(cache) {
      cache->normalized = std::move(normalized);
      cache->inv_std    = inv_std;
      cache->mode       = mode;
   }
   return out;
}

Matrix batchnorm_backward(const Matrix& d_out,
                          const BatchNormParams& p,
                          const BatchNormCache& cache,
                          BatchNormParams& grad)
{
   const auto& xhat = cache.normalized;
   grad.scale += (d_out.array() * xhat.array()).rowwise().sum().matrix();
   grad.shift += d_out.rowwise().sum();

   const Matrix d_xhat = d_out.array().colwise() * p.scale.array();
   if(cache.mode == Mode::eval)
      return d_xhat.array().colwise() * cache.inv_std.array();

   const double n      = double(d_out.cols());
   const Vector sum_d  = d_xhat.rowwise().sum();
   const Vector sum_dx = (d_xhat.array() * xhat.array()).rowwise().sum();
   Matrix d_in         = (n * d_xhat).colwise() - sum_d;
   d_in -= (xhat.array().colwise() * sum_dx.array()).matrix();
   return (d_in.array().colwise() * (cache.inv_std.array() / n)).matrix();
}

// ------------------------------------------------------------------ dropout
//
Matrix dropout_mask(Eigen::Index rows,
                    Eigen::Index cols,
                    double rate,
                    Mode mode,
                    std::mt19937_64& rng)
{
   if(!(rate >= 0.0 && rate < 1.0))
      throw ValidationError("dropout rate must be in [0, 1)");
   if(mode == Mode::eval || rate == 0.0) return Matrix();
   std::uniform_real_distribution<double> u(0.0, 1.0);
   const double keep_scale = 1.0 / (1.0 - rate);
   Matrix mask(rows, cols);
   for(Eigen::Index c = 0; c < cols; ++c)
      for(Eigen::Index r = 0; r < rows; ++r)
         mask(r, c) = u(rng) < rate ? 0.0 : keep_scale;
   return mask;
}

Matrix dropout(const Matrix& input,
               double rate,
               std::mt19937_64& rng,
               Mode mode)
{
   const Matrix mask = dropout_mask(input.rows(), input.cols(), rate, mode, rng);
   if(mask.size() == 0) return input;
   return input.cwiseProduct(mask);
}

// ------------------------------------------------------------------ adam
//
void adam_step(std::vector<ParamView>& params,
               const std::vector<ParamView>& grads,
               AdamState& state,
               double lr,
               const AdamConfig& cfg)
{
   if(params.size() != grads.size())
      throw ValidationError("adam: parameter and gradient counts differ");
   if(state.m.empty()) {
      for(const auto& p : params) {
         state.m.push_back(Vector::Zero(p.size()));
         state.v.push_back(Vector::Zero(p.size()));
      }
   }
   if(state.m.size() != params.size())
      throw ValidationError("adam: state does not match parameters");

   ++state.step;
   const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
   const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
   for(size_t k = 0; k < params.size(); ++k) {
      if(grads[k].size() != params[k].size() || state.m[k].size() != params[k].size())
         throw ValidationError("adam: shape mismatch");
      auto& m = state.m[k];
      auto& v = state.v[k];
      m       = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[k];
      v       = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[k].cwiseAbs2();
      params[k].array()
          -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
   }
}

} // namespace nn
} // namespace posesmooth
