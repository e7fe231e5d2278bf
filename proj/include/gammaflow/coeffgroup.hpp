#pragma once

// Finitely generated abelian coefficient groups Z^a x Z_q1 x ... x Z_qt and
// the decomposition norm |s| = inf { sum E(s_i) : sum s_i = s } built from a
// per-element cost E.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gammaflow {

class GroupElement {
 public:
  GroupElement() = default;
  explicit GroupElement(std::vector<std::int64_t> coords) : coords_(std::move(coords)) {}

  const std::vector<std::int64_t>& coords() const { return coords_; }
  std::size_t size() const { return coords_.size(); }
  std::int64_t operator[](std::size_t i) const { return coords_[i]; }

  auto operator<=>(const GroupElement&) const = default;
  bool operator==(const GroupElement&) const = default;

 private:
  std::vector<std::int64_t> coords_;
};

std::string to_string(const GroupElement& g);

class CoefficientGroup {
 public:
  CoefficientGroup() = default;
  CoefficientGroup(int free_rank, std::vector<std::int64_t> torsion_orders);

  static CoefficientGroup integers() { return CoefficientGroup(1, {}); }

  int free_rank() const { return free_rank_; }
  const std::vector<std::int64_t>& torsion_orders() const { return torsion_; }
  std::size_t rank() const { return static_cast<std::size_t>(free_rank_) + torsion_.size(); }
  bool is_trivial() const { return rank() == 0; }
  bool is_finite() const { return free_rank_ == 0; }

  GroupElement zero() const;
  // Reduces torsion coordinates into [0, q). Throws on a length mismatch.
  GroupElement element(std::vector<std::int64_t> coords) const;
  GroupElement unit(std::size_t axis) const;

  GroupElement add(const GroupElement& a, const GroupElement& b) const;
  GroupElement sub(const GroupElement& a, const GroupElement& b) const;
  GroupElement neg(const GroupElement& a) const;
  GroupElement scale(std::int64_t m, const GroupElement& a) const;
  bool is_zero(const GroupElement& a) const;
  bool contains(const GroupElement& a) const;

  // Every element of a finite group, in lexicographic order.
  std::vector<GroupElement> enumerate() const;

  bool operator==(const CoefficientGroup&) const = default;

 private:
  int free_rank_ = 0;
  std::vector<std::int64_t> torsion_;
};

enum class CostExtension { none, power_law };

// A cost E on a finite support, optionally extended to multiples of the
// support elements: E(m g) = E(g) |m|^exponent for m outside the support.
struct CostTable {
  CoefficientGroup group;
  std::vector<std::pair<GroupElement, double>> entries;
  CostExtension extension = CostExtension::none;
  double exponent = 1.0;

  std::optional<double> cost(const GroupElement& g) const;
  // Throws ValidationError naming the offending element when a cost is
  // non-positive, an element is not reduced, or E(-g) != E(g).
  void validate() const;
};

struct Decomposition {
  double value = 0.0;
  std::vector<GroupElement> summands;  // sorted, ties broken lexicographically
};

// Exact infimum via shortest path from 0 to sigma in the Cayley graph whose
// edges are the costed elements. Throws ValidationError("unreachable element")
// when sigma is not in the subgroup generated by the support.
Decomposition decomposition_norm(const CostTable& table, const GroupElement& sigma);

// min over nonzero elements of the decomposition norm. Equal to the smallest
// nonzero cost, since every nonzero decomposition uses at least one summand.
double norm_gap(const CostTable& table);

// Immutable. The norm is cached eagerly on the window of elements whose free
// coordinates lie in [-cache_radius, cache_radius]; other elements are
// computed on demand without mutating the object.
class CostedNorm {
 public:
  CostedNorm(CostTable table, double p, int cache_radius = 4);

  double operator()(const GroupElement& g) const;
  Decomposition decompose(const GroupElement& g) const;

  double alpha() const { return alpha_; }
  double p() const { return p_; }
  const CoefficientGroup& group() const { return table_.group; }
  const CostTable& table() const { return table_; }
  const std::map<GroupElement, Decomposition>& cache() const { return cache_; }

  // True when |g| = sum_i w_i |g_i| on the whole cache window (free groups
  // only). The weights are the norms of the unit generators.
  bool is_weighted_l1(std::vector<double>* weights = nullptr) const;

 private:
  CostTable table_;
  double p_;
  double alpha_;
  std::map<GroupElement, Decomposition> cache_;
};

// Z with E_p(d) = 2 pi |d|^p, the minimal p-energy of a degree-d loop into S^1.
CostTable circle_cost_table(double p);
CostedNorm circle_norm(double p, int cache_radius = 4);

struct PqComparison {
  bool lower_ok = false;
  bool upper_ok = false;
  double f_pq = 0.0;
  double norm_p = 0.0;
  double norm_q = 0.0;
  double lower_lhs = 0.0;  // lambda |s|_q^f
  double upper_rhs = 0.0;  // |s|_q / lambda
};

double f_pq(double p, double q, int k);

// Evaluates lambda |s|_q^f(p,q) <= |s|_p <= |s|_q / lambda for k-1 < p < q.
PqComparison pq_comparison_bounds(const CostedNorm& norm_p, const CostedNorm& norm_q,
                                  const GroupElement& sigma, double lambda, int k);

}  // namespace gammaflow
