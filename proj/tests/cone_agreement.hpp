#pragma once

// Agreement run between normal_cone_membership and the sampling oracle on
// random 2x2 graph points with at most one singular value of Zbar at 1.

#include "graph_oracle.hpp"
#include "rankstat/graph_cone.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <tuple>

struct AgreementStats {
  int verified = 0, refuted = 0, unknown = 0, contradictions = 0;
  double max_verified_dist = 0.0;  // oracle distance, worst Verified query
  double min_refuted_dist = 1e9;
  int queries() const { return verified + refuted + unknown; }
};

inline AgreementStats run_cone_agreement(unsigned seed, int queries, double checker_tol = 1e-3,
                                         double t = 1e-4, int samples = 600) {
  using namespace rankstat;
  using testutil::uniform;
  std::mt19937_64 gen(seed);
  AgreementStats st;
  auto draw_sigma = [&](bool allow_one) {
    if (allow_one && uniform(gen, 0, 1) < 0.4) return 1.0;
    const double p = uniform(gen, 0, 1);
    return p < 0.4 ? uniform(gen, 1.2, 3.0) : p < 0.75 ? uniform(gen, 0.1, 0.8) : 0.0;
  };
  for (int q = 0; q < queries; ++q) {
    Vector s(2);
    s(0) = draw_sigma(true);
    s(1) = draw_sigma(s(0) != 1.0);
    std::sort(s.data(), s.data() + 2, std::greater<double>());
    const Matrix Z = testutil::with_singular_values(gen, s, 2);
    const Matrix X = graph_oracle::prox1(Z), W = Z - X;
    const int b = graph_oracle::near_kink_index(Z, 1e-12);
    auto positive = [&]() {
      if (b >= 0 && uniform(gen, 0, 1) < 0.5) return graph_oracle::sample_kink_normal(Z, b, gen, t);
      return graph_oracle::sample_normal(Z, gen, t);
    };
    // Queries: sampled normals, random pairs, sums of two sampled normals.
    Matrix G, H;
    const int kind = q % 3;
    if (kind == 0) {
      std::tie(G, H) = positive();
    } else if (kind == 1) {
      G = testutil::randn(gen, 2, 2);
      H = testutil::randn(gen, 2, 2);
    } else {
      auto [G1, H1] = positive();
      auto [G2, H2] = positive();
      G = G1 + G2;
      H = H1 + H2;
    }
    SearchOptions o;
    o.tol = checker_tol;
    const auto c = normal_cone_membership(X, W, G, H, o);
    const double dist = graph_oracle::min_normal_distance_all(Z, G, H, gen, samples, t);
    const bool oracle_out = dist > 0.3, oracle_in = dist < 1e-3;
    switch (c.verdict) {
      case Verdict::Verified:
        ++st.verified;
        st.max_verified_dist = std::max(st.max_verified_dist, dist);
        if (oracle_out) ++st.contradictions;
        break;
      case Verdict::Refuted:
        ++st.refuted;
        st.min_refuted_dist = std::min(st.min_refuted_dist, dist);
        if (oracle_in || kind == 0) ++st.contradictions;
        break;
      case Verdict::Unknown:
        ++st.unknown;
        break;
    }
  }
  return st;
}
