#include "support.hpp"

#include "posesmooth/error.hpp"
#include "posesmooth/synth.hpp"
#include "posesmooth/tpn.hpp"

#include "doctest.h"

using namespace posesmooth;

namespace
{
TpnConfig small_config(int joints = 3, int channels = 8)
{
   TpnConfig c;
   c.num_joints = joints;
   c.channels   = channels;
   return c;
}

TpnModel random_model(const TpnConfig& cfg, std::uint64_t seed)
{
   std::mt19937_64 rng(seed);
   auto m = TpnModel::initialize(cfg, rng);
   for(auto& v : m.params.views()) v = testing::random_matrix(rng, int(v.size()), 1, -0.5, 0.5);
   for(auto& s : m.bn_stats) {
      s.mean = testing::random_matrix(rng, int(s.mean.size()), 1, -0.2, 0.2);
      s.var  = testing::random_matrix(rng, int(s.var.size()), 1, 0.5, 1.5);
   }
   m.norm.input_mean  = testing::random_matrix(rng, cfg.input_dim(), 1, -0.1, 0.1);
   m.norm.input_std   = testing::random_matrix(rng, cfg.input_dim(), 1, 0.1, 0.3);
   m.norm.output_mean = testing::random_matrix(rng, cfg.output_dim(), 1, -100, 100);
   m.norm.output_std  = testing::random_matrix(rng, cfg.output_dim(), 1, 50, 200);
   m.norm.output_mean(2) += 4000.0;
   return m;
}

std::vector<Eigen::MatrixXd> random_windows(std::mt19937_64& rng, const TpnConfig& cfg, int n)
{
   std::vector<Eigen::MatrixXd> w;
   for(int i = 0; i < n; ++i)
      w.push_back(testing::random_matrix(rng, cfg.window_length(), cfg.input_dim(), -0.4, 0.4));
   return w;
}

Sequence tiny_sequence(std::uint64_t seed, int frames = 90)
{
   SynthConfig sc;
   sc.num_persons = 1;
   sc.num_frames  = frames;
   return generate_sequence(sc, seed, "tiny");
}

PersonTrack constant_track(int T, int J)
{
   PersonTrack tr;
   tr.person_id = "p0";
   Pose2D d;
   d.coords.resize(J, 2);
   for(int j = 0; j < J; ++j) d.coords.row(j) << 900.0 + 10 * j, 500.0 - 7 * j;
   d.confidence = Eigen::VectorXd::Ones(J);
   tr.detections.assign(T, d);
   tr.gt.assign(T, std::nullopt);
   return tr;
}

} // namespace

TEST_CASE("config geometry")
{
   TpnConfig c;
   CHECK(c.receptive_field() == 81);
   CHECK(c.window_length() == 81);
   CHECK(c.input_dim() == 34);
   CHECK(c.output_dim() == 51);
   CHECK(c.supports_strided());
   c.dilations = {2, 4, 8};
   CHECK_FALSE(c.supports_strided());
   c.dilations = {3, 9};
   CHECK_THROWS_AS(c.validate(), ValidationError);
   TpnConfig d;
   d.half_window = 30;
   CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("output shapes and encoding")
{
   std::mt19937_64 rng(1);
   TpnConfig cfg = small_config(17, 8);
   const auto m  = random_model(cfg, 2);
   const auto x  = stack_windows(random_windows(rng, cfg, 2), cfg, m.norm);
   CHECK(x.rows() == 34);
   CHECK(x.cols() == 2 * 81);
   const auto y = network_forward(m, x, 2);
   CHECK(y.rows() == 51);
   CHECK(y.cols() == 2);

   const auto p = testing::random_pose(rng, 5, 2);
   const auto v = pose_to_output(p, 2);
   CHECK(v.size() == 15);
   CHECK(v.head<3>() == p.location);
   CHECK(v.segment<3>(6) == p.relative.row(1).transpose());
   CHECK(v.segment<3>(9) == p.relative.row(3).transpose());
   const auto q = output_to_pose(v, 5, 2);
   CHECK(q.location == p.location);
   CHECK(q.relative == p.relative);
   CHECK_THROWS_AS(output_to_pose(v, 6, 2), ValidationError);
}

TEST_CASE("zero weights predict the output mean")
{
   std::mt19937_64 rng(3);
   const TpnConfig cfg = small_config();
   auto m              = random_model(cfg, 4);
   for(auto& v : m.params.views()) v.setZero();
   const auto win  = random_windows(rng, cfg, 1).front();
   const auto pose = tpn_forward(win, m);
   CHECK((pose_to_output(pose, 0) - m.norm.output_mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("eval mode is deterministic and layouts agree")
{
   std::mt19937_64 rng(5);
   const TpnConfig cfg = small_config();
   const auto m        = random_model(cfg, 6);
   const auto wins     = random_windows(rng, cfg, 4);
   const auto x        = stack_windows(wins, cfg, m.norm);
   const auto dense    = network_forward(m, x, 4, Layout::dense);
   CHECK(dense == network_forward(m, x, 4, Layout::dense));
   const auto strided = network_forward(m, x, 4, Layout::strided);
   CHECK((dense - strided).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + dense.cwiseAbs().maxCoeff()));

   for(int n = 0; n < 4; ++n) {
      const auto single = tpn_forward(wins[n], m);
      const Eigen::VectorXd col
          = m.norm.destandardize_outputs(dense.col(n).transpose()).transpose();
      CHECK((pose_to_output(single, 0) - col).cwiseAbs().maxCoeff() < 1e-9);
   }
}

TEST_CASE("strided layout matches dense evaluation at the centre output")
{
   std::mt19937_64 rng(7);
   const TpnConfig cfg = small_config(4, 6);
   auto m              = random_model(cfg, 8);
   const auto wins     = random_windows(rng, cfg, 3);
   const auto x        = stack_windows(wins, cfg, m.norm);

   // Dense over a longer sequence that contains each window once.
   for(int n = 0; n < 3; ++n) {
      Eigen::MatrixXd seq(cfg.input_dim(), 81 + 20);
      seq.leftCols(10)  = testing::random_matrix(rng, cfg.input_dim(), 10);
      seq.middleCols(10, 81) = x.middleCols(n * 81, 81);
      seq.rightCols(10) = testing::random_matrix(rng, cfg.input_dim(), 10);
      const auto long_out = network_forward(m, seq, 1, Layout::dense);
      REQUIRE(long_out.cols() == 21);
      const auto one = network_forward(m, x.middleCols(n * 81, 81), 1, Layout::strided);
      CHECK((long_out.col(10) - one.col(0)).cwiseAbs().maxCoeff() < 1e-10);
   }
}

TEST_CASE("backward matches finite differences in train mode")
{
   std::mt19937_64 rng(9);
   const TpnConfig cfg = small_config(3, 8);
   const TpnModel base = random_model(cfg, 10);
   const auto wins     = random_windows(rng, cfg, 3);
   const Eigen::MatrixXd up = testing::random_matrix(rng, cfg.output_dim(), 3);

   for(Layout layout : {Layout::dense, Layout::strided}) {
      TpnModel rec = base;
      TpnTape tape;
      std::mt19937_64 drop(11);
      tpn_forward(wins, rec, nn::Mode::train, layout, &drop, &tape);
      const auto g = tpn_backward(base, tape, up);

      auto loss = [&](const TpnModel& m, const std::vector<Eigen::MatrixXd>& w) {
         TpnModel copy = m;
         TpnTape t2;
         const auto poses = tpn_forward(w, copy, nn::Mode::train, layout, nullptr, &t2, &tape);
         double s = 0.0;
         for(int n = 0; n < 3; ++n) s += up.col(n).dot(pose_to_output(poses[n], 0));
         return s;
      };

      const double h = 1e-6;
      const double l0 = loss(base, wins);
      int checked = 0, kinks = 0, bad = 0;
      // Central difference, skipping probes whose one-sided slopes disagree
      // (a ReLU switched inside the step).
      auto probe_fd = [&](double analytic, auto&& eval_at) {
         const double lp = eval_at(h), lm = eval_at(-h);
         const double fwd = (lp - l0) / h, bwd = (l0 - lm) / h;
         const double fd  = (lp - lm) / (2 * h);
         if(std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(fd))) {
            ++kinks;
            return;
         }
         ++checked;
         if(testing::rel_err(analytic, fd, 1.0) > 1e-5) {
            ++bad;
            MESSAGE(analytic << " vs " << fd);
         }
      };

      TpnModel probe  = base;
      auto views      = probe.params.views();
      TpnParams gcopy = g.params;
      auto gviews     = gcopy.views();
      std::uniform_int_distribution<int> pick_t(0, int(views.size()) - 1);
      for(int k = 0; k < 120; ++k) {
         const int tensor = pick_t(rng);
         std::uniform_int_distribution<Eigen::Index> pick_i(0, views[tensor].size() - 1);
         const Eigen::Index i = pick_i(rng);
         const double keep    = views[tensor](i);
         probe_fd(gviews[tensor](i), [&](double d) {
            views[tensor](i) = keep + d;
            const double l   = loss(probe, wins);
            views[tensor](i) = keep;
            return l;
         });
      }
      for(int k = 0; k < 40; ++k) {
         const int n = k % 3;
         std::uniform_int_distribution<Eigen::Index> pick_i(0, wins[n].size() - 1);
         const Eigen::Index i = pick_i(rng);
         probe_fd(g.input[n].data()[i], [&](double d) {
            auto w = wins;
            w[n].data()[i] += d;
            return loss(base, w);
         });
      }
      CHECK(checked + kinks == 160);
      CHECK(checked >= 150);
      CHECK(bad == 0);
   }
}

TEST_CASE("zero upstream gives zero gradients")
{
   std::mt19937_64 rng(12);
   const TpnConfig cfg = small_config();
   TpnModel m          = random_model(cfg, 13);
   TpnTape tape;
   tpn_forward(random_windows(rng, cfg, 2), m, nn::Mode::train, Layout::dense, &rng, &tape);
   auto g = tpn_backward(m, tape, Eigen::MatrixXd::Zero(cfg.output_dim(), 2));
   for(auto& v : g.params.views()) CHECK(v.isZero(0.0));
   for(const auto& gi : g.input) CHECK(gi.isZero(0.0));
   CHECK_THROWS_AS(tpn_backward(m, tape, Eigen::MatrixXd::Zero(cfg.output_dim(), 3)),
                   ValidationError);
}

TEST_CASE("l1 loss and zoom augmentation")
{
   Pose3D a, b;
   a.location << 0, 0, 1000;
   b.location << 1, -2, 1003;
   a.relative = Joints3::Zero(2, 3);
   b.relative = Joints3::Zero(2, 3);
   b.relative.row(1) << 4, 0, -5;
   CHECK(l1_loss(a, b) == 15.0);
   CHECK(l1_loss(a, a) == 0.0);
   b.relative.resize(3, 3);
   CHECK_THROWS(l1_loss(a, b));

   Eigen::MatrixXd w(2, 2);
   w << 0.1, -0.2, 0.3, 0.4;
   Pose3D t;
   t.location << 100, 200, 4000;
   t.relative = Joints3::Ones(2, 3);
   const auto [w2, t2] = augment_scale(w, t, 1.25);
   CHECK(w2.isApprox(w * 1.25));
   CHECK(t2.location.x() == 100.0);
   CHECK(t2.location.y() == 200.0);
   CHECK(t2.location.z() == 3200.0);
   CHECK(t2.relative == t.relative);
   CHECK_THROWS_AS(augment_scale(w, t, 0.0), ValidationError);

   // zooming the image by alpha is consistent with the root moving to depth z/alpha
   CameraIntrinsics cam;
   Joints3 root(1, 3);
   root << 100, 200, 4000;
   Joints3 moved(1, 3);
   moved << 100, 200, 3200;
   const auto n1 = normalize_keypoints(project(root, cam), cam);
   const auto n2 = normalize_keypoints(project(moved, cam), cam);
   CHECK((n1.coords * 1.25 - n2.coords).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("receptive field is exactly 81 frames")
{
   const TpnConfig cfg = small_config(17, 8);
   const auto m        = random_model(cfg, 14);
   CameraIntrinsics cam;
   const int T = 200, t0 = 100;
   const auto base = predict_track(constant_track(T, 17), cam, m);
   for(int off : {-41, 41}) {
      auto tr = constant_track(T, 17);
      tr.detections[t0 + off]->coords.array() += 50.0;
      const auto p = predict_track(tr, cam, m);
      CHECK(p.poses[t0].location == base.poses[t0].location);
      CHECK(p.poses[t0].relative == base.poses[t0].relative);
   }
   for(int off : {-40, 40}) {
      auto tr = constant_track(T, 17);
      tr.detections[t0 + off]->coords.array() += 50.0;
      const auto p = predict_track(tr, cam, m);
      CHECK((p.poses[t0].location - base.poses[t0].location).norm() > 0.0);
   }
}

TEST_CASE("constant input gives a constant trajectory")
{
   const TpnConfig cfg = small_config(17, 8);
   const auto m        = random_model(cfg, 15);
   const auto p        = predict_track(constant_track(120, 17), CameraIntrinsics{}, m);
   REQUIRE(p.num_frames() == 120);
   for(int t = 1; t < 120; ++t) {
      CHECK((p.poses[t].location - p.poses[0].location).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((p.poses[t].relative - p.poses[0].relative).cwiseAbs().maxCoeff() < 1e-9);
   }
}

TEST_CASE("tracks with gaps are predicted on every frame")
{
   const TpnConfig cfg = small_config(17, 8);
   const auto m        = random_model(cfg, 16);
   auto tr             = constant_track(60, 17);
   for(int t = 10; t < 30; ++t) tr.detections[t].reset();
   tr.detections[59].reset();
   const auto p = predict_track(tr, CameraIntrinsics{}, m);
   REQUIRE(p.num_frames() == 60);
   for(int t = 0; t < 60; ++t) {
      CHECK(p.poses[t].location.allFinite());
      CHECK(p.had_detection[t] == (!(t >= 10 && t < 30) && t != 59));
   }

   const auto in = filled_inputs(tr, CameraIntrinsics{});
   CHECK(in.row(20) == in.row(9));
   CHECK(in.row(59) == in.row(58));
   const auto w = extract_window(in, 0, 3);
   CHECK(w.rows() == 7);
   CHECK(w.row(0) == in.row(0));
   CHECK(w.row(6) == in.row(3));
}

TEST_CASE("filled inputs interpolate linearly across gaps")
{
   PersonTrack tr;
   Pose2D d;
   d.coords.resize(2, 2);
   d.confidence = Eigen::VectorXd::Ones(2);
   tr.detections.resize(6);
   tr.gt.resize(6);
   d.coords << 960, 540, 960, 540;
   tr.detections[1] = d;
   d.coords << 1360, 540, 960, 940;
   tr.detections[5] = d;
   const auto in = filled_inputs(tr, CameraIntrinsics{});
   CHECK(in(0, 0) == 0.0);
   CHECK(in(3, 0) == doctest::Approx(0.2));
   CHECK(in(4, 3) == doctest::Approx(0.3));
   CHECK(in(5, 0) == doctest::Approx(0.4));
}

TEST_CASE("training: overfitting, logging and determinism")
{
   const auto seq = tiny_sequence(17);
   TpnConfig cfg  = small_config(17, 16);
   cfg.dropout_rate = 0.0;
   TrainConfig tc;
   tc.aug_scale_min = 1.0;
   tc.aug_scale_max = 1.0;
   tc.lr_decay      = 1.0;
   tc.epochs        = 40;
   tc.batch_size    = 16;
   tc.learning_rate = 3e-3;
   tc.seed          = 5;
   const auto r = train_tpn({seq}, {seq}, cfg, tc);
   REQUIRE(r.log.size() == 40);
   CHECK(r.final_train_loss < 0.5 * r.initial_train_loss);
   CHECK(r.model.is_finite());
   CHECK(r.final_train_loss == doctest::Approx(evaluate_loss(r.model, {seq})));

   tc = TrainConfig{};
   tc.epochs     = 3;
   tc.batch_size = 16;
   tc.seed       = 5;
   int callbacks = 0;
   const auto logged = train_tpn({seq}, {seq}, cfg, tc, [&](const EpochLog&) { ++callbacks; });
   CHECK(callbacks == 3);
   REQUIRE(logged.log.size() == 3);
   for(const auto& e : logged.log) {
      CHECK(e.learning_rate == doctest::Approx(1e-3 * std::pow(0.95, e.epoch - 1)));
      CHECK(std::isfinite(e.train_loss));
      CHECK(std::isfinite(e.val_loss));
   }

   tc.epochs    = 2;
   auto a       = train_tpn({seq}, {}, cfg, tc);
   auto b       = train_tpn({seq}, {}, cfg, tc);
   auto va      = a.model.params.views();
   auto vb      = b.model.params.views();
   bool same    = true;
   for(size_t k = 0; k < va.size(); ++k) same = same && va[k] == vb[k];
   CHECK(same);
   CHECK(std::isnan(a.log.back().val_loss));
   tc.seed   = 6;
   auto c    = train_tpn({seq}, {}, cfg, tc);
   auto vc   = c.model.params.views();
   CHECK_FALSE(va.front() == vc.front());

   TrainConfig bad;
   bad.batch_size = 1;
   CHECK_THROWS_AS(train_tpn({seq}, {}, cfg, bad), ValidationError);
   Sequence no_gt = seq;
   for(auto& tr : no_gt.tracks)
      for(auto& g : tr.gt) g.reset();
   CHECK_THROWS_AS(train_tpn({no_gt}, {}, cfg, tc), ValidationError);
}
