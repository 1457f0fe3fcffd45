#include "hiermirt/model.hpp"

#include <algorithm>
#include <sstream>

namespace hiermirt {

int HierarchySpec::total_traits() const {
  int total = 0;
  for (int q : traits) total += q;
  return total;
}

int HierarchySpec::offset(int level) const {
  int off = 0;
  for (int k = 0; k < level; ++k) off += traits[k];
  return off;
}

int HierarchySpec::children_of(int level, int trait) const {
  if (level == 0) return 0;
  const auto& p = parent[level - 1];
  return static_cast<int>(std::count(p.begin(), p.end(), trait));
}

HierarchySpec HierarchySpec::single_level(int q) { return HierarchySpec{{q}, {}}; }

HierarchySpec HierarchySpec::two_level(int q) {
  return HierarchySpec{{q, 1}, {std::vector<int>(q, 0)}};
}

Vector LatentState::stacked(int subject) const {
  Eigen::Index total = 0;
  for (const auto& t : theta) total += t.rows();
  Vector out(total);
  Eigen::Index off = 0;
  for (const auto& t : theta) {
    out.segment(off, t.rows()) = t.col(subject);
    off += t.rows();
  }
  return out;
}

void LatentState::set_stacked(int subject, const Vector& values) {
  Eigen::Index off = 0;
  for (auto& t : theta) {
    t.col(subject) = values.segment(off, t.rows());
    off += t.rows();
  }
}

LatentState LatentState::zeros(const HierarchySpec& spec, int subjects) {
  LatentState s;
  for (int q : spec.traits) s.theta.push_back(Matrix::Zero(q, subjects));
  return s;
}

ItemBank ItemBank::from_specs(std::vector<ItemSpec> specs, int level1_traits) {
  ItemBank bank;
  const int n = static_cast<int>(specs.size());
  bank.a = Matrix::Zero(n, level1_traits);
  bank.b = Vector::Zero(n);
  bank.c = Vector::Zero(n);
  bank.thresholds.resize(n);
  for (int i = 0; i < n; ++i) {
    if (specs[i].kind == ItemKind::graded) {
      const int m = specs[i].categories;
      bank.thresholds[i] = snap_thresholds(Vector::LinSpaced(m - 1, -1.0, 1.0));
      if (m == 2) bank.thresholds[i](0) = 0.0;
    }
  }
  bank.specs = std::move(specs);
  return bank;
}

void apply_echelon_restriction(std::vector<ItemSpec>& specs, int level1_traits) {
  const int limit = std::min<int>(level1_traits - 1, static_cast<int>(specs.size()));
  for (int i = 0; i < limit; ++i) {
    auto& s = specs[i];
    std::vector<int> kept;
    for (int q : s.loads) {
      if (q > i) {
        if (std::find(s.zeros.begin(), s.zeros.end(), q) == s.zeros.end()) s.zeros.push_back(q);
      } else {
        kept.push_back(q);
      }
    }
    std::sort(s.zeros.begin(), s.zeros.end());
    s.loads = std::move(kept);
  }
}

void validate_items(const ItemBank& items) {
  const int q1 = items.level1_traits();
  if (items.a.rows() != items.size() || items.b.size() != items.size() || items.c.size() != items.size() ||
      static_cast<int>(items.thresholds.size()) != items.size())
    throw InputError("item bank: parameter arrays do not match the item count");
  for (int i = 0; i < items.size(); ++i) {
    const auto& s = items.specs[i];
    auto where = [&] { return "item " + std::to_string(i + 1) + (s.name.empty() ? "" : " (" + s.name + ")"); };
    if (s.loads.empty()) throw InputError(where() + ": empty loading set");
    for (int q : s.loads)
      if (q < 0 || q >= q1) throw InputError(where() + ": loading on unknown trait " + std::to_string(q + 1));
    if (!std::is_sorted(s.loads.begin(), s.loads.end()) ||
        std::adjacent_find(s.loads.begin(), s.loads.end()) != s.loads.end())
      throw InputError(where() + ": loading set must be sorted and unique");
    if (s.kind == ItemKind::graded) {
      if (s.categories < 2) throw InputError(where() + ": graded item needs at least 2 categories");
      if (s.guessing) throw InputError(where() + ": graded items carry no guessing parameter");
      if (items.thresholds[i].size() != s.categories - 1)
        throw InputError(where() + ": expected " + std::to_string(s.categories - 1) + " thresholds");
      if (!strictly_increasing(items.thresholds[i])) throw InputError(where() + ": thresholds not increasing");
    } else {
      if (s.categories != 2) throw InputError(where() + ": dichotomous item must have 2 categories");
      if (!(items.c(i) >= 0.0 && items.c(i) < 1.0)) throw InputError(where() + ": guessing outside [0, 1)");
      if (!s.guessing && items.c(i) != 0.0) throw InputError(where() + ": guessing fixed at zero but c != 0");
    }
  }
  if (!item_structure_holds(items)) throw InputError("item bank: discrimination outside a loading set");
}

bool item_structure_holds(const ItemBank& items) {
  for (int i = 0; i < items.size(); ++i) {
    const auto& loads = items.specs[i].loads;
    for (int q = 0; q < items.level1_traits(); ++q) {
      const bool free = std::binary_search(loads.begin(), loads.end(), q);
      if (!free && items.a(i, q) != 0.0) return false;
    }
    if (items.is_graded(i) && !strictly_increasing(items.thresholds[i])) return false;
  }
  return true;
}

void validate_responses(const ResponseMatrix& responses, const ItemBank& items) {
  if (responses.items() != items.size())
    throw InputError("responses: " + std::to_string(responses.items()) + " items but item bank has " +
                     std::to_string(items.size()));
  std::vector<int> per_subject(responses.subjects(), 0);
  for (int i = 0; i < responses.items(); ++i) {
    int observed = 0;
    const int m = items.specs[i].categories;
    for (int j = 0; j < responses.subjects(); ++j) {
      const int y = responses.cells(i, j);
      if (y == kMissing) continue;
      if (y < 0 || y >= m) {
        std::ostringstream os;
        os << "responses: item " << i + 1 << ", subject " << j + 1 << ": score " << y << " outside 0.." << m - 1;
        throw InputError(os.str());
      }
      ++observed;
      ++per_subject[j];
    }
    if (observed == 0) throw InputError("responses: item " + std::to_string(i + 1) + " has no observed cell");
  }
  for (int j = 0; j < responses.subjects(); ++j)
    if (per_subject[j] == 0) throw InputError("responses: subject " + std::to_string(j + 1) + " has no observed cell");
}

Priors Priors::defaults(int level1_traits, double cov_scale) {
  Priors p;
  p.ab_mean = Vector::Ones(level1_traits + 1);
  p.ab_mean(level1_traits) = 0.0;
  p.ab_cov = cov_scale * Matrix::Identity(level1_traits + 1, level1_traits + 1);
  p.ag_mean = Vector::Ones(level1_traits);
  p.ag_cov = cov_scale * Matrix::Identity(level1_traits, level1_traits);
  return p;
}

double prob_correct_linear(double eta, double c) {
  if (!std::isfinite(eta) || !std::isfinite(c)) throw InputError("prob_correct: non-finite input");
  if (!(c >= 0.0 && c < 1.0)) throw InputError("prob_correct: guessing must lie in [0, 1)");
  return c + (1.0 - c) * normal_cdf(eta);
}

bool strictly_increasing(const Vector& v) {
  for (Eigen::Index m = 1; m < v.size(); ++m)
    if (!(v(m) > v(m - 1))) return false;
  for (Eigen::Index m = 0; m < v.size(); ++m)
    if (!std::isfinite(v(m))) return false;
  return true;
}

std::pair<double, double> grm_interval(int score, const Vector& thresholds) {
  const int top = static_cast<int>(thresholds.size());
  const double lo = score == 0 ? -kInf : thresholds(score - 1);
  const double hi = score == top ? kInf : thresholds(score);
  return {lo, hi};
}

Vector grm_category_probs(double eta, const Vector& thresholds) {
  if (!strictly_increasing(thresholds)) throw InputError("grm_category_probs: thresholds must be strictly increasing");
  if (!std::isfinite(eta)) throw InputError("grm_category_probs: non-finite linear predictor");
  const int m = static_cast<int>(thresholds.size()) + 1;
  Vector p(m);
  for (int s = 0; s < m; ++s) {
    const auto [lo, hi] = grm_interval(s, thresholds);
    p(s) = normal_interval(lo - eta, hi - eta);
  }
  return p;
}

double grm_log_prob(int score, double eta, const Vector& thresholds) {
  const auto [lo, hi] = grm_interval(score, thresholds);
  return log_normal_interval(lo - eta, hi - eta);
}

namespace {

double dichotomous_cell(int y, double eta, double c) {
  if (c == 0.0) return y == 1 ? log_normal_cdf(eta) : log_normal_cdf(-eta);
  const double p = c + (1.0 - c) * normal_cdf(eta);
  // 1 - p = (1 - c) Phi(-eta)
  return y == 1 ? std::log(p) : std::log1p(-c) + log_normal_cdf(-eta);
}

}  // namespace

double loglik_dichotomous(const ResponseMatrix& responses, const ItemBank& items, const Matrix& theta1) {
  double total = 0.0;
  for (int i = 0; i < responses.items(); ++i) {
    if (items.is_graded(i)) continue;
    for (int j = 0; j < responses.subjects(); ++j) {
      const int y = responses.cells(i, j);
      if (y == kMissing) continue;
      const double eta = items.a.row(i).dot(theta1.col(j)) - items.b(i);
      total += dichotomous_cell(y, eta, items.c(i));
    }
  }
  return total;
}

double loglik_graded(const ResponseMatrix& responses, const ItemBank& items, const Matrix& theta1) {
  double total = 0.0;
  for (int i = 0; i < responses.items(); ++i) {
    if (!items.is_graded(i)) continue;
    for (int j = 0; j < responses.subjects(); ++j) {
      const int y = responses.cells(i, j);
      if (y == kMissing) continue;
      total += grm_log_prob(y, items.a.row(i).dot(theta1.col(j)), items.thresholds[i]);
    }
  }
  return total;
}

double loglik_graded_item(std::span<const int> scores, const Vector& eta, const Vector& thresholds) {
  double total = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] == kMissing) continue;
    total += grm_log_prob(scores[j], eta(static_cast<Eigen::Index>(j)), thresholds);
  }
  return total;
}

double snap_threshold(double x) { return std::ldexp(std::nearbyint(std::ldexp(x, 40)), -40); }

Vector snap_thresholds(const Vector& thresholds) { return thresholds.unaryExpr(&snap_threshold); }

}  // namespace hiermirt
