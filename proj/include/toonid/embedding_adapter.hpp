// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "toonid/core.hpp"

namespace toonid {

inline constexpr int kDefaultEpochs = 75;
inline constexpr double kDefaultLrStart = 6e-4;
inline constexpr double kDefaultLrEnd = 5e-6;
inline constexpr double kDefaultTemperature = 0.07;

// Linear map applied to pre-projection visual features (no bias).
struct ProjectionMatrix {
  Eigen::MatrixXd weights;

  static ProjectionMatrix identity(std::size_t d) {
    return {Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))};
  }
  std::size_t d_in() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t d_out() const { return static_cast<std::size_t>(weights.rows()); }
};

struct TrainConfig {
  int epochs = kDefaultEpochs;
  double lr_start = kDefaultLrStart;
  double lr_end = kDefaultLrEnd;
  double temperature = kDefaultTemperature;
  std::uint64_t seed = 0;

  void check() const {
    if (epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0");
    if (!(lr_end > 0 && lr_start >= lr_end)) throw Error(ErrorCode::kInvalidArgument, "need lr_start >= lr_end > 0");
    if (!(temperature > 0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be > 0");
  }
};

namespace detail {

inline void check_temperature(double temperature) {
  if (!(temperature > 0) || !std::isfinite(temperature))
    throw Error(ErrorCode::kInvalidArgument, "temperature must be finite and > 0");
}

// log(sum(exp(x))) with the usual max shift.
inline double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

// Unbiased index in [0, n) from a 64-bit engine. Avoids the
// implementation-defined std::uniform_int_distribution.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

}  // namespace detail

// Contrastive loss of one anchor against its positive and a set of negatives.
// All inputs are L2-normalized before the dot products.
inline double infonce_loss(const EmbeddingVector& anchor, const EmbeddingVector& positive,
                           std::span<const EmbeddingVector> negatives, double temperature = kDefaultTemperature) {
  detail::check_temperature(temperature);
  if (negatives.empty()) throw Error(ErrorCode::kInvalidArgument, "InfoNCE needs at least one negative");
  const EmbeddingVector a = normalized(anchor);
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  check_same_dim(anchor, positive);
  logits.push_back(dot(a.view(), normalized(positive).view()) / temperature);
  for (const auto& n : negatives) {
    check_same_dim(anchor, n);
    logits.push_back(dot(a.view(), normalized(n).view()) / temperature);
  }
  return std::max(0.0, detail::log_sum_exp(logits) - logits.front());
}

struct ExemplarRef {
  std::size_t character = 0;
  std::size_t exemplar = 0;

  friend bool operator==(const ExemplarRef&, const ExemplarRef&) = default;
};

// One anchor character: a positive pair of its own exemplars and one exemplar
// from every other character.
struct TrainingBatch {
  ExemplarRef anchor;
  ExemplarRef positive;
  std::vector<ExemplarRef> negatives;

  friend bool operator==(const TrainingBatch&, const TrainingBatch&) = default;
};

inline std::vector<TrainingBatch> sample_epoch_batches(const CharacterBank& bank, std::mt19937_64& rng) {
  for (const auto& c : bank.characters)
    if (c.appearance_exemplars.size() < 2)
      throw Error(ErrorCode::kInvalidArgument,
                  "character '" + c.name + "' needs at least 2 appearance exemplars for adaptation", c.name);
  std::vector<TrainingBatch> batches;
  batches.reserve(bank.characters.size());
  for (std::size_t p = 0; p < bank.characters.size(); ++p) {
    const std::size_t n = bank.characters[p].appearance_exemplars.size();
    TrainingBatch b;
    const std::size_t i = detail::uniform_index(rng, n);
    std::size_t j = detail::uniform_index(rng, n - 1);
    if (j >= i) ++j;
    b.anchor = {p, i};
    b.positive = {p, j};
    for (std::size_t q = 0; q < bank.characters.size(); ++q) {
      if (q == p) continue;
      b.negatives.push_back({q, detail::uniform_index(rng, bank.characters[q].appearance_exemplars.size())});
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

inline std::vector<TrainingBatch> sample_epoch_batches(const CharacterBank& bank, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return sample_epoch_batches(bank, rng);
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::MatrixXd gradient;
};

// Total InfoNCE loss over the batches and its exact gradient with respect to W,
// where each exemplar x is mapped to z = Wx / |Wx| before the dot products.
inline LossAndGradient loss_gradient(const ProjectionMatrix& W, const CharacterBank& bank,
                                     std::span<const TrainingBatch> batches, double temperature) {
  detail::check_temperature(temperature);
  const Eigen::MatrixXd& M = W.weights;
  LossAndGradient out;
  out.gradient = Eigen::MatrixXd::Zero(M.rows(), M.cols());

  struct Mapped {
    Eigen::VectorXd x, z;
    double norm;
  };
  auto map = [&](const ExemplarRef& r) {
    const auto& v = bank.characters.at(r.character).appearance_exemplars.at(r.exemplar).values;
    if (v.size() != W.d_in()) throw Error(ErrorCode::kDimensionMismatch, "exemplar dimension does not match projection");
    Mapped m;
    m.x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    const Eigen::VectorXd y = M * m.x;
    m.norm = y.norm();
    if (!std::isfinite(m.norm)) throw Error(ErrorCode::kNonFinite, "projected exemplar norm overflowed");
    if (!(m.norm >= 1e-12)) throw Error(ErrorCode::kDegenerate, "projected exemplar has (near) zero norm");
    m.z = y / m.norm;
    return m;
  };
  // dL/dW contribution of dL/dz for one mapped vector: (I - z z^T) g / |y| x^T.
  auto accumulate = [&](const Mapped& m, const Eigen::VectorXd& dz) {
    const Eigen::VectorXd dy = (dz - m.z * m.z.dot(dz)) / m.norm;
    out.gradient.noalias() += dy * m.x.transpose();
  };

  for (const auto& b : batches) {
    if (b.negatives.empty()) throw Error(ErrorCode::kInvalidArgument, "batch has no negatives");
    const Mapped a = map(b.anchor);
    std::vector<Mapped> others;
    others.reserve(b.negatives.size() + 1);
    others.push_back(map(b.positive));
    for (const auto& n : b.negatives) others.push_back(map(n));

    std::vector<double> logits(others.size());
    for (std::size_t k = 0; k < others.size(); ++k) logits[k] = a.z.dot(others[k].z) / temperature;
    const double lse = detail::log_sum_exp(logits);
    out.loss += lse - logits[0];

    Eigen::VectorXd dza = Eigen::VectorXd::Zero(a.z.size());
    for (std::size_t k = 0; k < others.size(); ++k) {
      const double g = (std::exp(logits[k] - lse) - (k == 0 ? 1.0 : 0.0)) / temperature;
      dza += g * others[k].z;
      accumulate(others[k], g * a.z);
    }
    accumulate(a, dza);
  }
  return out;
}

// eta_e = lr_end + (lr_start - lr_end) (1 + cos(pi e / epochs)) / 2
inline double cosine_annealing_lr(int epoch, int epochs, double lr_start, double lr_end) {
  if (epochs <= 0) return lr_start;
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

struct TrainResult {
  ProjectionMatrix projection;
  std::vector<double> loss_curve;
};

// Full-batch gradient descent from the identity, one step per epoch with
// batches re-sampled each epoch from a single seeded stream.
inline TrainResult train_projection(const CharacterBank& bank, const TrainConfig& cfg) {
  cfg.check();
  if (bank.visual_dim == 0) throw Error(ErrorCode::kInvalidArgument, "bank has no visual dimension");
  TrainResult result{ProjectionMatrix::identity(bank.visual_dim), {}};
  if (cfg.epochs == 0) return result;
  if (bank.characters.size() < 2)
    throw Error(ErrorCode::kInvalidArgument, "adaptation needs at least 2 characters to form negatives");
  std::mt19937_64 rng(cfg.seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto batches = sample_epoch_batches(bank, rng);
    auto lg = loss_gradient(result.projection, bank, batches, cfg.temperature);
    if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "non-finite training loss at epoch " + std::to_string(e) +
                                             " (loss=" + std::to_string(lg.loss) + ")");
    }
    result.loss_curve.push_back(lg.loss);
    result.projection.weights -= cosine_annealing_lr(e, cfg.epochs, cfg.lr_start, cfg.lr_end) * lg.gradient;
  }
  return result;
}

inline EmbeddingVector apply_projection(const ProjectionMatrix& W, const EmbeddingVector& v) {
  if (v.dim() != W.d_in())
    throw Error(ErrorCode::kDimensionMismatch, "vector dimension " + std::to_string(v.dim()) +
                                                   " does not match projection input " + std::to_string(W.d_in()));
  const Eigen::VectorXd y = W.weights * Eigen::Map<const Eigen::VectorXd>(v.values.data(), static_cast<Eigen::Index>(v.dim()));
  const double n = y.norm();
  if (!(n >= 1e-12)) throw Error(ErrorCode::kDegenerate, "projected vector has (near) zero norm");
  EmbeddingVector out;
  out.values.resize(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) out.values[static_cast<std::size_t>(i)] = y[i] / n;
  out.normalized = true;
  return out;
}

// Projects every appearance exemplar (and the profile) of the bank.
inline CharacterBank project_bank(const CharacterBank& bank, const ProjectionMatrix& W) {
  CharacterBank out = bank;
  for (auto& c : out.characters) {
    for (auto& e : c.appearance_exemplars) e = apply_projection(W, e);
    if (c.profile_embedding.dim() != 0) c.profile_embedding = apply_projection(W, c.profile_embedding);
  }
  out.visual_dim = W.d_out();
  return out;
}

inline nlohmann::json projection_to_json(const TrainResult& r, const TrainConfig& cfg) {
  const auto& W = r.projection.weights;
  std::vector<double> row_major;
  row_major.reserve(static_cast<std::size_t>(W.size()));
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = 0; j < W.cols(); ++j) row_major.push_back(W(i, j));
  return nlohmann::json{{"d_in", r.projection.d_in()},
                        {"d_out", r.projection.d_out()},
                        {"weights", std::move(row_major)},
                        {"loss_curve", r.loss_curve},
                        {"config",
                         {{"epochs", cfg.epochs},
                          {"lr_start", cfg.lr_start},
                          {"lr_end", cfg.lr_end},
                          {"tau", cfg.temperature},
                          {"seed", cfg.seed}}}};
}

inline ProjectionMatrix projection_from_json(const nlohmann::json& j) {
  try {
    const auto d_in = j.at("d_in").get<std::size_t>();
    const auto d_out = j.at("d_out").get<std::size_t>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (d_in == 0 || d_out == 0 || w.size() != d_in * d_out)
      throw Error(ErrorCode::kValidation, "projection weights do not match d_out x d_in");
    ProjectionMatrix P{Eigen::MatrixXd(static_cast<Eigen::Index>(d_out), static_cast<Eigen::Index>(d_in))};
    for (std::size_t i = 0; i < d_out; ++i)
      for (std::size_t k = 0; k < d_in; ++k) {
        const double v = w[i * d_in + k];
        if (!std::isfinite(v)) throw Error(ErrorCode::kValidation, "projection has a non-finite weight");
        P.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
      }
    return P;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed projection document: ") + e.what());
  }
}

}  // namespace toonid
