#include "tabguard/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace tabguard {

FeatureGroups singleton_groups(std::size_t d) {
  FeatureGroups g(d);
  for (std::size_t j = 0; j < d; ++j) g[j] = {j};
  return g;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

struct Coalitions {
  std::vector<std::vector<char>> masks;
  std::vector<double> weights;
};

Coalitions enumerate_all(std::size_t M) {
  Coalitions c;
  const std::uint64_t total = std::uint64_t{1} << M;
  for (std::uint64_t bits = 1; bits + 1 < total; ++bits) {
    std::vector<char> mask(M);
    std::size_t s = 0;
    for (std::size_t j = 0; j < M; ++j) {
      mask[j] = static_cast<char>((bits >> j) & 1U);
      s += static_cast<std::size_t>(mask[j]);
    }
    c.weights.push_back(static_cast<double>(M - 1) /
                        (binomial(M, s) * static_cast<double>(s) * static_cast<double>(M - s)));
    c.masks.push_back(std::move(mask));
  }
  return c;
}

// Coalition sizes are drawn with probability proportional to the total kernel
// mass of that size, so every sampled coalition carries the same weight.
Coalitions sample_pairs(std::size_t M, std::size_t budget, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> cdf(M - 1);
  double acc = 0.0;
  for (std::size_t s = 1; s < M; ++s) {
    acc += static_cast<double>(M - 1) / (static_cast<double>(s) * static_cast<double>(M - s));
    cdf[s - 1] = acc;
  }
  Coalitions c;
  std::vector<std::size_t> perm(M);
  while (c.masks.size() + 2 <= budget) {
    const double u = rng.uniform() * acc;
    const std::size_t s = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) + 1;
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    // Partial Fisher-Yates: the first s entries form the coalition.
    for (std::size_t i = 0; i < s; ++i) std::swap(perm[i], perm[i + rng.index(M - i)]);
    std::vector<char> mask(M, 0), complement(M, 1);
    for (std::size_t i = 0; i < s; ++i) {
      mask[perm[i]] = 1;
      complement[perm[i]] = 0;
    }
    c.masks.push_back(std::move(mask));
    c.masks.push_back(std::move(complement));
    c.weights.push_back(1.0);
    c.weights.push_back(1.0);
  }
  return c;
}

}  // namespace

Attribution kernel_shap(const PredictFn& f, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                        const Matrix& background, const FeatureGroups& groups, std::size_t n_coalitions,
                        std::uint64_t seed) {
  const std::size_t d = static_cast<std::size_t>(x.size());
  const std::size_t M = groups.size();
  if (background.cols() != x.size()) throw ShapeError("kernel_shap: background width differs from x");
  if (background.rows() < 10) throw ParamError("kernel_shap: background needs at least 10 rows");
  if (M == 0) throw ParamError("kernel_shap: no features to attribute");
  if (n_coalitions < 2 * M + 4) {
    throw ParamError("kernel_shap: n_coalitions must be at least 2M+4 = " + std::to_string(2 * M + 4));
  }
  for (const auto& g : groups) {
    for (std::size_t c : g) {
      if (c >= d) throw ShapeError("kernel_shap: group column out of range");
    }
  }

  Attribution out;
  out.base = f(background).mean();
  out.prediction = f(Matrix(x))[0];
  const double delta = out.prediction - out.base;
  if (M == 1) {
    out.values = Vector::Constant(1, delta);
    return out;
  }

  const bool exhaustive = M < 63 && (std::uint64_t{1} << M) - 2 <= n_coalitions;
  const Coalitions coal = exhaustive ? enumerate_all(M) : sample_pairs(M, n_coalitions, seed);
  const std::size_t K = coal.masks.size();
  const auto m = background.rows();

  // Coalitions are evaluated in blocks of about 4096 rows to bound memory.
  const std::size_t per_block = std::max<std::size_t>(1, 4096 / static_cast<std::size_t>(m));
  Vector coalition_mean(static_cast<Eigen::Index>(K));
  Matrix batch;
  for (std::size_t k0 = 0; k0 < K; k0 += per_block) {
    const std::size_t kn = std::min(per_block, K - k0);
    batch.resize(static_cast<Eigen::Index>(kn) * m, background.cols());
    for (std::size_t k = 0; k < kn; ++k) {
      auto block = batch.middleRows(static_cast<Eigen::Index>(k) * m, m);
      block = background;
      for (std::size_t g = 0; g < M; ++g) {
        if (!coal.masks[k0 + k][g]) continue;
        for (std::size_t c : groups[g]) block.col(static_cast<Eigen::Index>(c)).setConstant(x[static_cast<Eigen::Index>(c)]);
      }
    }
    const Vector preds = f(batch);
    if (preds.size() != batch.rows()) throw ShapeError("kernel_shap: model returned the wrong number of predictions");
    for (std::size_t k = 0; k < kn; ++k) {
      coalition_mean[static_cast<Eigen::Index>(k0 + k)] = preds.segment(static_cast<Eigen::Index>(k) * m, m).mean();
    }
  }

  // v(z) - base - z_M * delta = sum_{j<M} phi_j (z_j - z_M)
  const auto P = static_cast<Eigen::Index>(M - 1);
  Matrix Z(static_cast<Eigen::Index>(K), P);
  Vector target(static_cast<Eigen::Index>(K));
  Vector w(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double zM = coal.masks[k][M - 1];
    for (Eigen::Index j = 0; j < P; ++j) Z(kk, j) = coal.masks[k][static_cast<std::size_t>(j)] - zM;
    target[kk] = coalition_mean[kk] - out.base - zM * delta;
    w[kk] = coal.weights[k];
  }
  const Matrix A = Z.transpose() * w.asDiagonal() * Z;
  const Vector rhs = Z.transpose() * w.asDiagonal() * target;

  Vector phi;
  Eigen::LDLT<Matrix> ldlt(A);
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    phi = ldlt.solve(rhs);
    ok = phi.allFinite() && ldlt.rcond() > 1e-12;
  }
  if (!ok) {
    const double ridge = 1e-8 * std::max(1.0, A.trace() / static_cast<double>(P));
    Eigen::LLT<Matrix> llt(A + ridge * Matrix::Identity(P, P));
    if (llt.info() != Eigen::Success) throw SolverError("kernel_shap: regression system is singular");
    phi = llt.solve(rhs);
    if (!phi.allFinite()) throw SolverError("kernel_shap: regression produced non-finite values");
  }
  out.values.resize(static_cast<Eigen::Index>(M));
  out.values.head(P) = phi;
  out.values[P] = delta - phi.sum();
  return out;
}

Matrix sample_background(const Matrix& X, std::size_t size, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (size >= n) return X;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return gather_rows(X, idx);
}

double cosine_sim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_sim: length mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<double> average_ranks(const Vector& v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v[static_cast<Eigen::Index>(a)] < v[static_cast<Eigen::Index>(b)];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[static_cast<Eigen::Index>(order[j + 1])] == v[static_cast<Eigen::Index>(order[i])]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
  if (a.size() < 2) throw MetricError("spearman needs at least two entries");
  if (a.maxCoeff() == a.minCoeff() || b.maxCoeff() == b.minCoeff()) {
    throw MetricError("spearman is undefined for a constant vector");
  }
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double d = static_cast<double>(a.size());
  const bool ties = std::set<double>(ra.begin(), ra.end()).size() != ra.size() ||
                    std::set<double>(rb.begin(), rb.end()).size() != rb.size();
  if (!ties) {
    double s = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) s += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    return 1.0 - 6.0 * s / (d * (d * d - 1.0));
  }
  const double mean = (d + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double l2_dist(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("l2_dist: length mismatch");
  return (a - b).norm();
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) {
    s.mean = s.median = s.p5 = std::nan("");
    return s;
  }
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.median = quantile_sorted(values, 0.5);
  s.p5 = quantile_sorted(values, 0.05);
  return s;
}

StabilityStats stability_report(const PredictFn& f, const Matrix& X_clean, const Matrix& X_adv,
                                const Matrix& background, const FeatureGroups& groups,
                                std::size_t n_instances, std::size_t n_coalitions, std::uint64_t seed,
                                std::size_t threads) {
  if (X_clean.rows() != X_adv.rows() || X_clean.cols() != X_adv.cols()) {
    throw ShapeError("stability_report: clean and adversarial matrices are not row-aligned");
  }
  const std::size_t n = std::min(n_instances, static_cast<std::size_t>(X_clean.rows()));
  struct Slot {
    Attribution clean, adv;
    double cos = 0.0, rho = 0.0, l2 = 0.0;
    std::string error;
  };
  std::vector<Slot> slots(n);
  parallel_for_blocks(n, threads ? threads : default_thread_count(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto& s = slots[i];
      const auto r = static_cast<Eigen::Index>(i);
      const std::uint64_t row_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
      try {
        s.clean = kernel_shap(f, X_clean.row(r), background, groups, n_coalitions, row_seed);
        s.adv = kernel_shap(f, X_adv.row(r), background, groups, n_coalitions, row_seed);
        s.cos = cosine_sim(s.clean.values, s.adv.values);
        s.rho = spearman(s.clean.values, s.adv.values);
        s.l2 = l2_dist(s.clean.values, s.adv.values);
      } catch (const Error& err) {
        s.error = "row " + std::to_string(i) + ": " + err.what();
      }
    }
  });
  StabilityStats out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = slots[i];
    if (!s.error.empty()) {
      ++out.failures;
      out.failure_messages.push_back(std::move(s.error));
      continue;
    }
    out.rows.push_back(i);
    out.cosine.push_back(s.cos);
    out.spearman.push_back(s.rho);
    out.l2.push_back(s.l2);
    out.clean.push_back(std::move(s.clean));
    out.adversarial.push_back(std::move(s.adv));
  }
  out.cosine_summary = summarize(out.cosine);
  out.spearman_summary = summarize(out.spearman);
  out.l2_summary = summarize(out.l2);
  return out;
}

}  // namespace tabguard
