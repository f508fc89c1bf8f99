#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fhmm/model.hpp"
#include "oracles.hpp"

using namespace fhmm;

TEST_CASE("joint indexing is row-major and self-inverse") {
  CHECK(joint_index(0, 0) == 0);
  CHECK(joint_index(0, 1) == 1);
  CHECK(joint_index(1, 0) == 2);
  CHECK(joint_index(1, 1) == 3);
  for (int k = 0; k < kNumJointStates; ++k)
    CHECK(joint_index(joint_state(k)) == k);
}

TEST_CASE("validate_model accepts a valid model and reports violations") {
  std::mt19937_64 rng(7);
  FhmmModel m = oracles::random_model(rng, EmissionFamily::LogNormalCopula);
  CHECK(validate_model(m).ok());

  SUBCASE("non-stochastic transition row") {
    m.chains[0].A(0, 0) += 0.1;
    const auto res = validate_model(m);
    CHECK_FALSE(res.ok());
    bool found = false;
    for (const auto& v : res.violations)
      found |= v.message.find("not stochastic") != std::string::npos;
    CHECK(found);
  }
  SUBCASE("nonpositive sigma") {
    m.emissions.sigma(2, 1) = 0.0;
    const auto res = validate_model(m);
    CHECK_FALSE(res.ok());
    bool found = false;
    for (const auto& v : res.violations)
      found |= v.message.find("nonpositive sigma") != std::string::npos;
    CHECK(found);
  }
  SUBCASE("correlation matrix must be unit-diagonal") {
    m.emissions.R_global(0, 0) = 1.5;
    CHECK_FALSE(validate_model(m).ok());
  }
  SUBCASE("pi0 bounds") {
    m.emissions.inflated.pi0 = 1.0;
    CHECK_FALSE(validate_model(m).ok());
  }
  SUBCASE("multiple violations all reported") {
    m.chains[1].A(1, 0) = -0.2;
    m.emissions.sigma(0, 0) = -1.0;
    CHECK(validate_model(m).violations.size() >= 2);
  }
}

TEST_CASE("kron_transition ordering and stochasticity") {
  Matrix A1(2, 2), A2(2, 2);
  A1 << 0.9, 0.1, 0.3, 0.7;
  A2 << 0.8, 0.2, 0.4, 0.6;
  const Matrix K = kron_transition(A1, A2);
  REQUIRE(K.rows() == 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d)
          CHECK(K(joint_index(a, b), joint_index(c, d)) ==
                doctest::Approx(A1(a, c) * A2(b, d)).epsilon(1e-15));
  for (int i = 0; i < 4; ++i)
    CHECK(K.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));

  Matrix bad = A1;
  bad(0, 0) = 0.5;
  CHECK_THROWS(kron_transition(bad, A2));
}

TEST_CASE("sample_sequence is deterministic and respects the atom") {
  std::mt19937_64 rng(11);
  FhmmModel m = oracles::random_model(rng, EmissionFamily::LogNormalCopula);
  m.emissions.inflated.pi0 = 0.6;

  const auto s1 = sample_sequence(m, 500, 42);
  const auto s2 = sample_sequence(m, 500, 42);
  CHECK(s1.states == s2.states);
  CHECK((s1.obs - s2.obs).cwiseAbs().maxCoeff() == 0.0);

  const auto s3 = sample_sequence(m, 500, 43);
  CHECK((s1.obs - s3.obs).cwiseAbs().maxCoeff() > 0.0);

  int atoms = 0, clears = 0;
  for (int t = 0; t < 500; ++t) {
    CHECK(s1.obs.row(t).minCoeff() > 0.0);
    if (s1.states[t] == 0) {
      ++clears;
      atoms += s1.obs(t, kVisibilityDim) == m.emissions.inflated.c;
    } else {
      // atom only occurs in state (0,0)
      CHECK(s1.obs(t, kVisibilityDim) != m.emissions.inflated.c);
    }
  }
  if (clears > 50) {
    const double frac = static_cast<double>(atoms) / clears;
    CHECK(frac > 0.35);
    CHECK(frac < 0.85);
  }
}

TEST_CASE("sampled transition frequencies match the chains") {
  std::mt19937_64 rng(13);
  FhmmModel m = oracles::random_model(rng, EmissionFamily::LogNormalCopula);
  m.chains[0].A << 0.9, 0.1, 0.2, 0.8;
  m.chains[1].A << 0.7, 0.3, 0.4, 0.6;
  const auto s = sample_sequence(m, 60000, 5);
  Matrix counts = Matrix::Zero(2, 2);
  for (size_t t = 1; t < s.states.size(); ++t)
    counts(s.states[t - 1] / 2, s.states[t] / 2) += 1.0;
  for (int i = 0; i < 2; ++i) {
    const Vector row = counts.row(i) / counts.row(i).sum();
    CHECK(row[0] == doctest::Approx(m.chains[0].A(i, 0)).epsilon(0.05));
  }
}

TEST_CASE("JSON round trip preserves every parameter bitwise") {
  std::mt19937_64 rng(17);
  for (auto family :
       {EmissionFamily::LogNormalCopula, EmissionFamily::JointGaussian}) {
    FhmmModel m = oracles::random_model(rng, family);
    const FhmmModel r = model_from_json(model_to_json(m));
    CHECK(r.emissions.family == family);
    for (int j = 0; j < kNumChains; ++j) {
      CHECK((r.chains[j].A - m.chains[j].A).cwiseAbs().maxCoeff() == 0.0);
      CHECK((r.chains[j].phi - m.chains[j].phi).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((r.emissions.mu - m.emissions.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.emissions.sigma - m.emissions.sigma).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.emissions.inflated.pi0 == m.emissions.inflated.pi0);
    CHECK(r.emissions.inflated.theta == m.emissions.inflated.theta);
    CHECK(r.emissions.inflated.eta2 == m.emissions.inflated.eta2);
    CHECK(r.emissions.inflated.c == m.emissions.inflated.c);
    if (family == EmissionFamily::LogNormalCopula)
      CHECK((r.emissions.R_global - m.emissions.R_global).cwiseAbs().maxCoeff() ==
            0.0);
    else
      for (int s = 0; s < kNumJointStates; ++s)
        CHECK((r.emissions.Sigma_jg[s] - m.emissions.Sigma_jg[s])
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    CHECK(r.feature_names == m.feature_names);
  }
}

TEST_CASE("model JSON rejects malformed input") {
  CHECK_THROWS(model_from_json("{"));
  CHECK_THROWS(model_from_json("{}"));
}
