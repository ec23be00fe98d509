#pragma once

#include <random>

#include "ssgc/encoder.hpp"

namespace ssgc {

struct LossWeights {
  double alpha = 0.5;   // prototype contrast
  double beta = 0.01;   // edge loss
  double sigma = 1e-3;  // neighborhood margin
  double tau = 0.7;     // temperature

  void validate(bool allow_zero_alpha = false, bool allow_zero_beta = false) const {
    if (!(alpha > 0.0 || (allow_zero_alpha && alpha == 0.0))) throw Error(ErrorCode::InvalidConfig, "alpha must be > 0");
    if (!(beta > 0.0 || (allow_zero_beta && beta == 0.0))) throw Error(ErrorCode::InvalidConfig, "beta must be > 0");
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::InvalidConfig, "tau must lie in (0,1)");
    if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be >= 0");
  }
};

// Standard-normal noise, one draw per entry, from a (seed, epoch) stream.
inline Tensor gaussian_noise(std::size_t rows, std::size_t cols, std::uint64_t seed, std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32), 0x4e01u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> n01(0.0, 1.0);
  Tensor t({rows, cols});
  for (auto& v : t.data) v = n01(rng);
  return t;
}

// L_NA = (1/M) sum_i || g(f(x_i) + sigma * eps_i) - f'(x_i^+) ||^2.
// `predictor` maps the perturbed online embedding through g. With
// `normalize`, both g(v_i) and f'(x_i^+) are l2-normalized first, so each
// term equals 2 - 2 cos.
inline Var neighborhood_alignment_loss(Var online, const Tensor& targets, double sigma, const Tensor& noise,
                                       const std::function<Var(Var)>& predictor, bool normalize = false) {
  require(online.value().size() == targets.size(), "online/target embedding shapes differ");
  require(noise.size() == online.value().size(), "noise shape mismatch");
  Tensor scaled = noise;
  for (auto& v : scaled.data) v *= sigma;
  Var v = add_constant(online, scaled);
  if (!normalize) return mean_row_squared_error(predictor(v), targets);
  Tape scratch;
  const Tensor unit = l2_normalize_rows(scratch.constant(targets)).value();
  return mean_row_squared_error(l2_normalize_rows(predictor(v)), unit);
}

struct Prototypes {
  Var online;               // K x F, rows unit norm (differentiable)
  Tensor target;            // K x F, rows unit norm
  std::vector<std::size_t> degenerate;  // clusters whose summed embedding vanished
};

namespace detail {

inline std::vector<std::size_t> as_segments(const std::vector<int>& assignment, std::size_t k) {
  std::vector<std::size_t> ids(assignment.size());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] < 0 || static_cast<std::size_t>(assignment[i]) >= k)
      throw Error(ErrorCode::EmptyCluster, "assignment outside 0..K-1");
    ids[i] = static_cast<std::size_t>(assignment[i]);
    ++counts[ids[i]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] == 0) throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(c) + " is empty");
  return ids;
}

}  // namespace detail

// mu_k = normalize(sum_{x in S_k} f(x)); mu_k^+ = normalize(sum f'(x^+)).
inline Prototypes build_prototypes(Var online, const Tensor& target_plus, const std::vector<int>& assignment,
                                   std::size_t k) {
  const auto ids = detail::as_segments(assignment, k);
  Prototypes out;
  Var sums = segment_sum(online, ids, k);
  const std::size_t f = sums.value().dim(1);
  for (std::size_t c = 0; c < k; ++c)
    if (norm2({sums.value().data.data() + c * f, f}) <= kNormEps) out.degenerate.push_back(c);
  if (!out.degenerate.empty())
    warn("DegeneratePrototype: " + std::to_string(out.degenerate.size()) + " prototype(s) with vanishing sum");
  out.online = l2_normalize_rows(sums);

  Tape scratch;
  out.target = l2_normalize_rows(segment_sum(scratch.constant(target_plus), ids, k)).value();
  return out;
}

// L_PC = (1/K) sum_k -log softmax_j(mu_k . mu_j^+ / tau)[k].
inline Var prototype_contrast_loss(Var mu, const Tensor& mu_plus, double tau) {
  Tape& t = *mu.tape;
  Var logits = scale(matmul(mu, transpose(t.constant(mu_plus))), 1.0 / tau);
  return diagonal_cross_entropy(logits);
}

// L = L_NA + alpha * L_PC + beta * L_E. Any term may be absent.
inline Var total_loss(Var l_na, std::optional<Var> l_pc, std::optional<Var> l_e, double alpha, double beta) {
  Var total = l_na;
  if (l_pc) total = add(total, scale(*l_pc, alpha));
  if (l_e) total = add(total, scale(*l_e, beta));
  return total;
}

}  // namespace ssgc
