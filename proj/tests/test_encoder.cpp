#include <doctest.h>

#include <Eigen/QR>
#include <cmath>
#include <functional>

#include "overlap/encoder.hpp"
#include "overlap/rng.hpp"
#include "overlap/sphere.hpp"

using namespace overlap;

namespace {

Mat random_unit_rows(int n, int dim, Rng& rng) {
  Mat m(n, dim);
  for (int i = 0; i < n; ++i) {
    m.row(i) = sample_sphere_uniform(dim, rng).transpose();
  }
  return m;
}

Mat random_orthogonal(int dim, Rng& rng) {
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  }
  return Eigen::HouseholderQR<Mat>(g).householderQ() * Mat::Identity(dim, dim);
}

// max relative error between analytic gradients and central differences
double max_grad_rel_error(EncoderParams p,
                          const std::function<double(const EncoderParams&)>& f,
                          const ParamGrads& analytic, double step = 1e-5) {
  struct Span {
    double* param;
    const double* grad;
    Eigen::Index count;
  };
  const Span spans[] = {
      {p.w1.data(), analytic.w1.data(), p.w1.size()},
      {p.b1.data(), analytic.b1.data(), p.b1.size()},
      {p.w2.data(), analytic.w2.data(), p.w2.size()},
      {p.b2.data(), analytic.b2.data(), p.b2.size()},
  };
  double max_rel = 0.0;
  for (const Span& s : spans) {
    for (Eigen::Index i = 0; i < s.count; ++i) {
      const double orig = s.param[i];
      s.param[i] = orig + step;
      const double fp = f(p);
      s.param[i] = orig - step;
      const double fm = f(p);
      s.param[i] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double g = s.grad[i];
      const double rel =
          std::abs(fd - g) / std::max({1e-4, std::abs(fd), std::abs(g)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

EncoderParams constant_encoder(int input, int output) {
  EncoderParams p;
  p.activation = Activation::Tanh;
  p.w1 = Mat::Zero(4, input);
  p.b1 = Vec::Zero(4);
  p.w2 = Mat::Zero(output, 4);
  p.b2 = Vec::Unit(output, 0);
  return p;
}

}  // namespace

TEST_CASE("forward outputs are unit-norm for random inputs") {
  Rng rng(3);
  for (const auto act :
       {Activation::Softmax, Activation::Tanh, Activation::Relu}) {
    EncoderParams p = EncoderParams::init(3, 16, 5, act, rng);
    const Mat xs = random_unit_rows(1000, 3, rng);
    const Mat z = encoder_forward_batch(p, xs);
    for (int i = 0; i < z.rows(); ++i) {
      CHECK(std::abs(z.row(i).norm() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("constant map from zeroed output layer") {
  Rng rng(5);
  const EncoderParams p = constant_encoder(3, 6);
  const Mat xs = random_unit_rows(50, 3, rng);
  const Mat z = encoder_forward_batch(p, xs);
  for (int i = 0; i < z.rows(); ++i) {
    CHECK(z(i, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(z.row(i).tail(5).norm() == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("degenerate pre-normalization falls back to a basis vector") {
  EncoderParams p = constant_encoder(3, 4);
  p.b2.setZero(); // zpre identically zero
  Vec x(3);
  x << 1, 0, 0;
  const Vec z = encoder_forward(p, x);
  CHECK(z[0] == 1.0);
  CHECK(z.tail(3).norm() == 0.0);
}

TEST_CASE("input jacobian matches central differences") {
  Rng rng(9);
  for (const auto act : {Activation::Softmax, Activation::Tanh}) {
    EncoderParams p = EncoderParams::init(4, 12, 6, act, rng);
    for (int t = 0; t < 10; ++t) {
      const Vec x = sample_sphere_uniform(4, rng);
      const Mat jac = encoder_input_jacobian(p, x);
      const double step = 1e-5;
      for (int c = 0; c < 4; ++c) {
        Vec xp = x, xm = x;
        xp[c] += step;
        xm[c] -= step;
        const Vec fd =
            (encoder_forward(p, xp) - encoder_forward(p, xm)) / (2 * step);
        for (int r = 0; r < 6; ++r) {
          const double rel =
              std::abs(fd[r] - jac(r, c)) /
              std::max({1e-4, std::abs(fd[r]), std::abs(jac(r, c))});
          CHECK(rel < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("closed-form InfoNCE values") {
  Rng rng(13);

  SUBCASE("all embeddings identical gives log M") {
    const EncoderParams p = constant_encoder(3, 4);
    for (const int m : {1, 7, 255}) {
      const Mat anchors = random_unit_rows(6, 3, rng);
      const Mat positives = random_unit_rows(6, 3, rng);
      std::vector<Mat> negatives(6, random_unit_rows(m, 3, rng));
      const double loss = infonce_loss(p, anchors, positives, negatives);
      CHECK(loss ==
            doctest::Approx(std::log(static_cast<double>(m))).epsilon(1e-12));
      const double shared =
          infonce_loss_shared(p, anchors, positives, negatives[0]);
      CHECK(shared ==
            doctest::Approx(std::log(static_cast<double>(m))).epsilon(1e-12));
    }
  }

  SUBCASE("single negative at the antipode gives -2") {
    Mat za(1, 4), zp(1, 4), zn(1, 4);
    za.row(0) = Vec::Unit(4, 0).transpose();
    zp.row(0) = Vec::Unit(4, 0).transpose();
    zn.row(0) = -Vec::Unit(4, 0).transpose();
    CHECK(infonce_from_embeddings(za, zp, {zn}) ==
          doctest::Approx(-2.0).epsilon(1e-12));
  }

  SUBCASE("invariant under simultaneous orthogonal rotation") {
    const Mat za = random_unit_rows(5, 6, rng);
    const Mat zp = random_unit_rows(5, 6, rng);
    std::vector<Mat> zn;
    for (int i = 0; i < 5; ++i) zn.push_back(random_unit_rows(9, 6, rng));
    const double base = infonce_from_embeddings(za, zp, zn);

    const Mat rot = random_orthogonal(6, rng);
    std::vector<Mat> znr;
    for (const Mat& b : zn) znr.push_back(b * rot.transpose());
    const double rotated = infonce_from_embeddings(za * rot.transpose(),
                                                   zp * rot.transpose(), znr);
    CHECK(rotated == doctest::Approx(base).epsilon(1e-12));
  }

  SUBCASE("no negatives is an error") {
    const EncoderParams p = constant_encoder(3, 4);
    const Mat anchors = random_unit_rows(2, 3, rng);
    std::vector<Mat> empty_blocks(2, Mat(0, 3));
    CHECK_THROWS(infonce_loss(p, anchors, anchors, empty_blocks));
  }
}

TEST_CASE("InfoNCE gradients match central differences") {
  Rng rng(17);
  for (const auto act : {Activation::Softmax, Activation::Tanh}) {
    EncoderParams p = EncoderParams::init(3, 8, 4, act, rng);
    const Mat anchors = random_unit_rows(4, 3, rng);
    const Mat positives = random_unit_rows(4, 3, rng);
    std::vector<Mat> negatives;
    for (int i = 0; i < 4; ++i) negatives.push_back(random_unit_rows(3, 3, rng));

    {
      double loss = 0.0;
      const ParamGrads g = infonce_grad(p, anchors, positives, negatives, &loss);
      CHECK(loss ==
            doctest::Approx(infonce_loss(p, anchors, positives, negatives)));
      const double rel = max_grad_rel_error(
          p,
          [&](const EncoderParams& q) {
            return infonce_loss(q, anchors, positives, negatives);
          },
          g);
      CHECK(rel < 1e-4);
    }

    {
      const Mat pool = random_unit_rows(6, 3, rng);
      double loss = 0.0;
      const ParamGrads g =
          infonce_grad_shared(p, anchors, positives, pool, &loss);
      CHECK(loss ==
            doctest::Approx(infonce_loss_shared(p, anchors, positives, pool)));
      const double rel = max_grad_rel_error(
          p,
          [&](const EncoderParams& q) {
            return infonce_loss_shared(q, anchors, positives, pool);
          },
          g);
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("dead relu units receive no gradient") {
  Rng rng(21);
  EncoderParams p = EncoderParams::init(3, 6, 4, Activation::Relu, rng);
  p.b1[1] = -100.0; // unit 1 never activates on unit-norm inputs
  p.b1[4] = -100.0;
  const Mat anchors = random_unit_rows(5, 3, rng);
  const Mat positives = random_unit_rows(5, 3, rng);
  const Mat pool = random_unit_rows(7, 3, rng);
  const ParamGrads g = infonce_grad_shared(p, anchors, positives, pool);
  for (const int dead : {1, 4}) {
    CHECK(g.w1.row(dead).norm() == 0.0);
    CHECK(g.b1[dead] == 0.0);
    CHECK(g.w2.col(dead).norm() == 0.0);
  }
  CHECK(g.w1.row(0).norm() > 0.0);
}

TEST_CASE("gradient stays finite when all embeddings coincide") {
  Rng rng(23);
  const EncoderParams p = constant_encoder(3, 4);
  const Mat anchors = random_unit_rows(4, 3, rng);
  const Mat positives = random_unit_rows(4, 3, rng);
  const Mat pool = random_unit_rows(5, 3, rng);
  double loss = 0.0;
  const ParamGrads g = infonce_grad_shared(p, anchors, positives, pool, &loss);
  CHECK(std::isfinite(loss));
  CHECK(std::isfinite(g.squared_norm()));
}

TEST_CASE("training is deterministic and records a trace") {
  const auto ds = two_pole_dataset(60, 1.0, 5);
  TrainConfig cfg;
  cfg.r = 0.1;
  cfg.negatives = 31;
  cfg.batch_size = 32;
  cfg.epochs = 4;
  cfg.hidden = 16;
  cfg.output_dim = 8;
  cfg.seed = 11;

  const TrainResult a = train(ds, cfg);
  const TrainResult b = train(ds, cfg);
  CHECK(a.params.w1 == b.params.w1);
  CHECK(a.params.b1 == b.params.b1);
  CHECK(a.params.w2 == b.params.w2);
  CHECK(a.params.b2 == b.params.b2);
  REQUIRE(a.trace.records.size() == 4);
  for (size_t e = 0; e < a.trace.records.size(); ++e) {
    CHECK(a.trace.records[e].loss == b.trace.records[e].loss);
    CHECK(std::isfinite(a.trace.records[e].loss));
    CHECK_FALSE(a.trace.records[e].acr.has_value());
  }

  SUBCASE("metrics probe runs on the cadence") {
    cfg.metrics_every = 2;
    int calls = 0;
    const auto probe = [&calls](const EncoderParams&, int) {
      ++calls;
      return std::pair<double, double>{0.25, 0.5};
    };
    const TrainResult c = train(ds, cfg, probe);
    CHECK(calls == 2);
    CHECK(c.trace.records[1].acr == 0.25);
    CHECK(c.trace.records[3].eps == 0.5);
    CHECK_FALSE(c.trace.records[0].acr.has_value());
  }

  SUBCASE("config validation") {
    TrainConfig bad = cfg;
    bad.negatives = 0;
    CHECK_THROWS(train(ds, bad));
    bad = cfg;
    bad.epochs = 0;
    CHECK_THROWS(train(ds, bad));
    bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS(train(ds, bad));
    bad = cfg;
    bad.batch_size = ds.size() + 1;
    CHECK_THROWS(train(ds, bad));
  }
}

TEST_CASE("training loss trends downward on the two-cap task") {
  const auto ds = two_pole_dataset(250, 1.0, 31);
  TrainConfig cfg;
  cfg.r = 0.1;
  cfg.negatives = 63;
  cfg.batch_size = 64;
  cfg.epochs = 30;
  cfg.hidden = 32;
  cfg.output_dim = 8;
  cfg.learning_rate = 0.05;
  cfg.seed = 1;

  const TrainResult res = train(ds, cfg);
  int non_increasing = 0;
  const auto& rec = res.trace.records;
  for (size_t e = 1; e < rec.size(); ++e) {
    if (rec[e].loss <= rec[e - 1].loss + 1e-9) ++non_increasing;
  }
  CHECK(static_cast<double>(non_increasing) / (rec.size() - 1) >= 0.9);
  CHECK(rec.back().loss < rec.front().loss);
}
