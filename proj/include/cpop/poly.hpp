#pragma once

// Sparse multivariate polynomials over real coefficients, the monomial
// basis used by the moment hierarchy and the linear functional L_y.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cpop {

using VarIndex = std::uint32_t;

// Exponent vector stored sparsely as (variable, power) pairs sorted by
// variable. Zero powers are never stored; the empty monomial is 1.
class Monomial {
 public:
  using Entry = std::pair<VarIndex, std::uint32_t>;

  Monomial() = default;
  Monomial(std::initializer_list<Entry> entries);
  static Monomial variable(VarIndex v, std::uint32_t power = 1);
  static Monomial from_entries(std::vector<Entry> entries);

  std::uint32_t degree() const { return degree_; }
  bool is_constant() const { return entries_.empty(); }
  std::uint32_t exponent(VarIndex v) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<VarIndex> variables() const;
  // Every exponent even (member of (2N)^N); the constant counts as even.
  bool is_even() const;
  VarIndex max_variable() const { return entries_.empty() ? 0 : entries_.back().first; }

  Monomial operator*(const Monomial& other) const;
  // Partial derivative of the monomial w.r.t. v; returns the multiplier.
  std::pair<std::uint32_t, Monomial> differentiate(VarIndex v) const;
  double evaluate(std::span<const double> x) const;

  bool operator==(const Monomial& o) const { return entries_ == o.entries_; }
  bool operator!=(const Monomial& o) const { return !(*this == o); }

  std::string to_string() const;

 private:
  std::vector<Entry> entries_;
  std::uint32_t degree_ = 0;
};

// Graded lexicographic order: lower degree first, ties broken so that a
// larger power of a lower-indexed variable comes first (x1 before x2,
// x1^2 before x1*x2).
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GrlexLess>;
  static constexpr double kPruneTol = 1e-12;

  Polynomial() = default;
  explicit Polynomial(std::size_t nvars) : nvars_(nvars) {}

  static Polynomial constant(std::size_t nvars, double c);
  static Polynomial variable(std::size_t nvars, VarIndex v);
  static Polynomial monomial(std::size_t nvars, const Monomial& m, double c = 1.0);

  std::size_t nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  double coefficient(const Monomial& m) const;
  double constant_term() const { return coefficient(Monomial{}); }

  std::uint32_t degree() const;
  std::vector<Monomial> support() const;
  std::vector<VarIndex> variables() const;

  // Adds c to the coefficient of m, pruning the result when it vanishes.
  void add_term(const Monomial& m, double c);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return *this * -1.0; }
  Polynomial pow(unsigned k) const;

  Polynomial grad(VarIndex v) const;
  double evaluate(std::span<const double> x) const;

  // Fixes the variables with fixed[v] = true to values[v]; other variables
  // are left symbolic.
  Polynomial substitute(const std::vector<bool>& fixed, std::span<const double> values) const;
  // Renames variables: new index of v is mapping[v]; every variable in the
  // support must map to a valid index below new_nvars.
  Polynomial reindex(const std::vector<std::int64_t>& mapping, std::size_t new_nvars) const;
  // Embeds the polynomial into a larger variable universe (indices kept).
  Polynomial widen(std::size_t new_nvars) const;

  nlohmann::json to_json() const;
  static Polynomial from_json(const nlohmann::json& j, std::size_t nvars);

 private:
  void check_same_universe(const Polynomial& o) const;
  void prune();

  TermMap terms_;
  std::size_t nvars_ = 0;
};

inline Polynomial operator*(double s, const Polynomial& p) { return p * s; }

// Graded-lex ordered list of all monomials over `vars` of degree <= d.
// The constant monomial comes first.
std::vector<Monomial> make_basis(std::span<const VarIndex> vars, int d);

// Moment sequence y indexed by exponent vectors; the constant monomial
// always maps to 1.
class MomentVector {
 public:
  MomentVector();
  void set(const Monomial& m, double value);
  bool contains(const Monomial& m) const { return values_.count(m) > 0; }
  double at(const Monomial& m) const;
  const std::map<Monomial, double, GrlexLess>& values() const { return values_; }

 private:
  std::map<Monomial, double, GrlexLess> values_;
};

// L_y(f) = sum_alpha f_alpha y_alpha. Throws MissingMoment when y lacks an
// entry for some alpha in supp(f).
double apply_Ly(const MomentVector& y, const Polynomial& f);

struct DegreeInfo {
  std::uint32_t degree;
  std::uint32_t half_degree;  // ceil(degree / 2)
};
DegreeInfo degree_and_halfdeg(const Polynomial& f);

}  // namespace cpop
