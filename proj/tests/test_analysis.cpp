#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "isolab/analysis.hpp"
#include "isolab/errors.hpp"
#include "isolab/theory.hpp"
#include "support.hpp"

namespace isolab {
namespace {

// Record of `n` steps whose sorted eigenvalues are fn(step).
TrajectoryRecord make_record(std::size_t n, const std::function<Vector(long long)>& fn) {
  TrajectoryRecord r;
  for (std::size_t i = 0; i < n; ++i) {
    const auto step = static_cast<long long>(i);
    Vector v = fn(step);
    std::sort(v.data(), v.data() + v.size(), std::greater<>());
    r.steps.push_back(step);
    r.corr_eig.push_back(v);
  }
  return r;
}

Regime label_of(const TrajectoryRecord& r) { return classify(r).label; }

TEST(Classify, ConstantOnes) {
  EXPECT_EQ(label_of(make_record(200, [](long long) { return Vector(Vector::Ones(4)); })),
            Regime::ConvergeToOne);
}

TEST(Classify, GeometricDecayCollapses) {
  const auto r = make_record(200, [](long long t) {
    return Vector(Vector{{1.0, 0.5, 0.2}} * std::pow(0.9, static_cast<double>(t)));
  });
  EXPECT_EQ(label_of(r), Regime::Collapse);
}

TEST(Classify, ExactZeroCollapses) {
  const auto r = make_record(200, [](long long t) {
    return Vector(t < 50 ? Vector::Ones(2) : Vector::Zero(2));
  });
  EXPECT_EQ(label_of(r), Regime::Collapse);
}

TEST(Classify, EqualNonUnitValues) {
  const auto r = make_record(200, [](long long t) {
    return Vector(2.0 + (Vector{{1.0, -1.0, 0.5}} * std::exp(-0.1 * static_cast<double>(t))).array());
  });
  EXPECT_EQ(label_of(r), Regime::ConvergeToEqual);
}

TEST(Classify, FrozenSpreadIsStatic) {
  const auto r = make_record(200, [](long long) { return Vector(Vector{{2.0, 0.5, 0.1}}); });
  EXPECT_EQ(label_of(r), Regime::Static);
}

TEST(Classify, GrowthDiverges) {
  const auto r = make_record(200, [](long long t) {
    return Vector(Vector{{1.0, 0.5}} * std::exp(0.05 * static_cast<double>(t)));
  });
  EXPECT_EQ(label_of(r), Regime::Diverge);
}

TEST(Classify, BlowUpFlagWinsEvenWithFewRecords) {
  auto r = make_record(5, [](long long) { return Vector(Vector::Ones(2)); });
  EXPECT_THROW(classify(r), ConfigError);
  r.blow_up = true;
  EXPECT_EQ(label_of(r), Regime::Diverge);
}

TEST(Classify, UnclassifiedCarriesEvidence) {
  const auto r = make_record(200, [](long long t) {
    return Vector(Vector{{2.0 + 0.5 * static_cast<double>(t % 2), 0.5}});
  });
  try {
    (void)classify(r);
    FAIL();
  } catch (const UnclassifiedError& e) {
    EXPECT_NEAR(e.evidence().window_drift, 0.25, 1e-12);
    EXPECT_NE(std::string(e.what()).find("terminal_cv="), std::string::npos);
  }
}

TEST(Classify, PrecedenceOneBeforeEqual) {
  const auto r = make_record(200, [](long long) { return Vector(Vector{{1.02, 1.0, 0.99}}); });
  EXPECT_EQ(label_of(r), Regime::ConvergeToOne);
}

TEST(Classify, ThresholdsAreConfigurable) {
  const auto r = make_record(200, [](long long) { return Vector(Vector{{1.08, 1.0}}); });
  EXPECT_EQ(label_of(r), Regime::ConvergeToEqual);
  Thresholds t;
  t.one_band = 0.1;
  EXPECT_EQ(classify(r, t).label, Regime::ConvergeToOne);
  t.window = 0.0;
  EXPECT_THROW(classify(r, t), ConfigError);
}

TEST(Classify, IndependentOfEigenvalueOrderBeforeSorting) {
  Rng rng(41);
  for (int k = 0; k < 10; ++k) {
    const Vector base = (test::normal_vector(5, rng).array().abs() + 0.5).matrix();
    auto forward = make_record(150, [&](long long) { return base; });
    auto shuffled = make_record(150, [&](long long t) {
      Vector v = base;
      std::swap(v(t % 5), v((t + 2) % 5));
      return v;
    });
    EXPECT_EQ(classify(forward).label, classify(shuffled).label);
  }
}

TEST(Classify, MatchesTable1) {
  const auto r = make_record(200, [](long long) { return Vector(Vector::Ones(3)); });
  EXPECT_TRUE(classify(r, LossSpec{}).matches_table1);
  EXPECT_FALSE(classify(r, LossSpec{Metric::Cosine}).matches_table1);
  EXPECT_TRUE(matches_table1({Metric::Cosine, Variant::NoPredictor}, Regime::Static));
  EXPECT_TRUE(matches_table1({Metric::Euclidean, Variant::IsoAlternative}, Regime::ConvergeToOne));
  EXPECT_TRUE(matches_table1({Metric::Cosine, Variant::NoStopGrad}, Regime::Diverge));
  EXPECT_TRUE(matches_table1({Metric::Euclidean, Variant::NoStopGrad}, Regime::Collapse));
  EXPECT_TRUE(matches_table1({Metric::Euclidean, Variant::NoPredictor}, Regime::Static));
  EXPECT_FALSE(matches_table1({Metric::Euclidean, Variant::NoPredictor}, Regime::Collapse));
}

TEST(Record, Validation) {
  TrajectoryRecord r = make_record(3, [](long long) { return Vector(Vector::Ones(2)); });
  EXPECT_NO_THROW(r.validate());
  r.losses = {1.0};
  EXPECT_THROW(r.validate(), DimensionError);
  r.losses.clear();
  r.steps[2] = 1;
  EXPECT_THROW(r.validate(), ConfigError);
  EXPECT_EQ(parse_regime("converge_to_equal"), Regime::ConvergeToEqual);
  EXPECT_THROW(parse_regime("wobble"), ConfigError);
}

TEST(EigenSumDrift, ConstantAndGrowing) {
  EXPECT_EQ(eigen_sum_drift(make_record(10, [](long long) { return Vector(Vector{{2.0, 1.0}}); })), 0.0);
  const auto r = make_record(10, [](long long t) { return Vector(Vector{{1.0 + 0.1 * static_cast<double>(t), 1.0}}); });
  EXPECT_NEAR(eigen_sum_drift(r), 0.45, 1e-12);
}

TEST(ConvergenceSteps, FirstEntryIntoTerminalBand) {
  // lambda_m(t) = 1 + (l0_m - 1) exp(-r_m t): entry when |l0_m - 1| e^{-r t} <= 0.05.
  const Vector l0{{3.0, 0.2}}, rate{{0.1, 0.02}};
  TrajectoryRecord r;
  for (long long t = 0; t <= 2000; ++t) {
    Vector v = (1.0 + ((l0.array() - 1.0) * (-rate.array() * static_cast<double>(t)).exp())).matrix();
    r.steps.push_back(t);
    r.corr_eig.push_back(v);
  }
  const auto steps = convergence_steps(r);
  for (int m = 0; m < 2; ++m) {
    const double terminal = r.corr_eig.back()(m);
    const double exact = std::log(std::abs(l0(m) - 1.0) / (0.05 * terminal)) / rate(m);
    EXPECT_NEAR(static_cast<double>(steps[static_cast<std::size_t>(m)]), exact, 1.0);
  }
  EXPECT_EQ(convergence_spread(r), std::abs(steps[0] - steps[1]));
}

TEST(ConvergenceSteps, TraceNormalizationRemovesGlobalScale) {
  // Equal shape reached at t = 10, then a slow common drift of 20%.
  TrajectoryRecord r;
  for (long long t = 0; t <= 100; ++t) {
    const double shape = t < 10 ? 1.0 + 0.1 * static_cast<double>(10 - t) : 1.0;
    const double scale = 1.0 + 0.002 * static_cast<double>(t);
    r.steps.push_back(t);
    r.corr_eig.push_back(scale * Vector{{shape, 1.0}});
  }
  const auto raw = convergence_steps(r);
  EXPECT_GT(raw[1], 50);
  const auto normalized = convergence_steps(r, 0.05, EigenSeries::Correlation, SpectrumScale::TraceNormalized);
  EXPECT_LE(normalized[0], 10);
  EXPECT_EQ(natural_scale({Metric::Cosine}), SpectrumScale::TraceNormalized);
  EXPECT_EQ(natural_scale({}), SpectrumScale::Raw);
}

TEST(Alignment, SharedEigenbasisScoresOne) {
  Rng rng(42);
  const SymMatrix c = test::random_psd(6, rng);
  EXPECT_GE(alignment_scores(c, matrix_power(c, 0.5).matrix()).minCoeff(), 1.0 - 1e-9);
  EXPECT_EQ(alignment_scores(c, Matrix::Identity(6, 6)), Vector::Ones(6));
}

TEST(Alignment, MixedEigenvectorsScoreBelowOne) {
  // Rank-one predictor along (e1 + e2) / sqrt 2: scores 1/sqrt 2, 1/sqrt 2, 0.
  const SymMatrix c = SymMatrix::diagonal(Vector{{3.0, 2.0, 1.0}});
  const Vector v = Vector{{1.0, 1.0, 0.0}} / std::sqrt(2.0);
  const Vector s = alignment_scores(c, v * v.transpose());
  EXPECT_NEAR(s(0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s(1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s(2), 0.0);
}

TEST(Alignment, SignFlipInvariantAndZeroGuard) {
  Rng rng(44);
  const SymMatrix c = test::random_psd(4, rng);
  const Matrix p = test::normal_matrix(4, 4, rng);
  EXPECT_LE((alignment_scores(c, p) - alignment_scores(c, -p)).norm(), 1e-15);
  const Vector s = alignment_scores(c, p);
  EXPECT_GE(s.minCoeff(), 0.0);
  EXPECT_LE(s.maxCoeff(), 1.0);
  EXPECT_EQ(alignment_scores(c, Matrix::Zero(4, 4)), Vector::Zero(4));
  EXPECT_THROW(alignment_scores(c, Matrix::Zero(3, 3)), DimensionError);
}

TEST(RelativeContributions, OneHotAndSkipsZero) {
  const SymEigDecomp eig = sym_eig(SymMatrix::diagonal(Vector{{3.0, 2.0, 1.0}}));
  Matrix z = Matrix::Zero(3, 3);
  z(1, 0) = -4.0;
  z(1, 1) = 0.5;
  const Vector chi = mean_relative_contributions(eig, z);
  EXPECT_NEAR(chi(1), 1.0, 1e-15);
  EXPECT_NEAR(chi(0) + chi(2), 0.0, 1e-15);
}

TEST(CompareTheory, SelfComparisonIsExact) {
  const TheoryTrajectory t = integrate(
      [](const Vector& l) { return table1_eigen_rhs({}, l, 0.1); }, Vector{{0.3, 1.7, 2.5}}, 0.01,
      20000, 20);
  const TheoryComparison c = compare_theory(to_record(t), t);
  EXPECT_LE(c.max_sup_deviation(), 1e-12);
  EXPECT_NEAR(c.time_scale, 1.0 / t.dt, 1e-9);  // record steps count RK4 steps
  EXPECT_NEAR(c.time_offset, 0.0, 1e-9);
}

TEST(CompareTheory, RecoversTimeScale) {
  const TheoryTrajectory t = integrate(
      [](const Vector& l) { return table1_eigen_rhs({}, l, 0.1); }, Vector{{0.3, 1.7}}, 0.01, 20000, 20);
  TrajectoryRecord r;
  for (std::size_t i = 0; i < t.times.size(); ++i) {
    r.steps.push_back(static_cast<long long>(std::llround(t.times[i] * 1000.0)));
    Vector v = t.states[i];
    std::sort(v.data(), v.data() + v.size(), std::greater<>());
    r.corr_eig.push_back(v);
  }
  const TheoryComparison c = compare_theory(r, t);
  EXPECT_NEAR(c.time_scale, 1000.0, 50.0);
  EXPECT_LT(c.max_sup_deviation(), 0.02);
}

TEST(CompareTheory, CollapseVersusConvergenceFlagged) {
  const TheoryTrajectory one = integrate(
      [](const Vector& l) { return table1_eigen_rhs({}, l, 0.1); }, Vector{{0.5, 1.5}}, 0.01, 10000, 10);
  const TheoryTrajectory collapse = integrate(
      [](const Vector& l) { return table1_eigen_rhs({Metric::Euclidean, Variant::NoStopGrad}, l, 0.1); },
      Vector{{0.5, 0.8}}, 0.01, 10000, 10);
  EXPECT_GT(compare_theory(to_record(collapse), one).max_terminal_deviation(), 0.5);
}

TEST(CompareTheory, Preconditions) {
  const TheoryTrajectory t = integrate([](const Vector& l) { return Vector(-l); }, Vector::Ones(2), 0.1, 10);
  const auto r = make_record(10, [](long long) { return Vector(Vector::Ones(3)); });
  EXPECT_THROW(compare_theory(r, t), DimensionError);
  TheoryTrajectory z = t;
  z.kind = StateKind::ZHat;
  EXPECT_THROW(compare_theory(make_record(10, [](long long) { return Vector(Vector::Ones(2)); }), z),
               ConfigError);
  EXPECT_THROW(to_record(z), ConfigError);
}

TEST(ToRecord, StepsAndSorting) {
  const TheoryTrajectory t = integrate([](const Vector& l) { return Vector(-l); }, Vector{{0.5, 2.0}}, 0.05, 40, 4);
  const TrajectoryRecord r = to_record(t);
  EXPECT_EQ(r.steps.front(), 0);
  EXPECT_EQ(r.steps[1], 4);
  EXPECT_EQ(r.steps.back(), 40);
  EXPECT_GE(r.corr_eig.front()(0), r.corr_eig.front()(1));
  EXPECT_EQ(r.pred_eig.size(), r.corr_eig.size());
}

}  // namespace
}  // namespace isolab
