#include "cpop/poly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpop/error.hpp"

namespace cpop {

Monomial::Monomial(std::initializer_list<Entry> entries)
    : Monomial(from_entries(std::vector<Entry>(entries))) {}

Monomial Monomial::variable(VarIndex v, std::uint32_t power) {
  Monomial m;
  if (power > 0) {
    m.entries_.emplace_back(v, power);
    m.degree_ = power;
  }
  return m;
}

Monomial Monomial::from_entries(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end());
  Monomial m;
  for (const auto& [v, p] : entries) {
    if (p == 0) continue;
    if (!m.entries_.empty() && m.entries_.back().first == v) {
      m.entries_.back().second += p;
    } else {
      m.entries_.emplace_back(v, p);
    }
    m.degree_ += p;
  }
  return m;
}

std::uint32_t Monomial::exponent(VarIndex v) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), v,
                             [](const Entry& e, VarIndex key) { return e.first < key; });
  return (it != entries_.end() && it->first == v) ? it->second : 0;
}

std::vector<VarIndex> Monomial::variables() const {
  std::vector<VarIndex> vars;
  vars.reserve(entries_.size());
  for (const auto& e : entries_) vars.push_back(e.first);
  return vars;
}

bool Monomial::is_even() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const Entry& e) { return e.second % 2 == 0; });
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial out;
  out.entries_.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      out.entries_.push_back(*a++);
    } else if (a == entries_.end() || b->first < a->first) {
      out.entries_.push_back(*b++);
    } else {
      out.entries_.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  out.degree_ = degree_ + other.degree_;
  return out;
}

std::pair<std::uint32_t, Monomial> Monomial::differentiate(VarIndex v) const {
  Monomial out;
  std::uint32_t mult = 0;
  for (const auto& e : entries_) {
    if (e.first == v) {
      mult = e.second;
      if (e.second > 1) out.entries_.emplace_back(v, e.second - 1);
    } else {
      out.entries_.push_back(e);
    }
  }
  if (mult == 0) return {0, Monomial{}};
  out.degree_ = degree_ - 1;
  return {mult, out};
}

double Monomial::evaluate(std::span<const double> x) const {
  double v = 1.0;
  for (const auto& [var, p] : entries_) {
    const double base = x[var];
    for (std::uint32_t k = 0; k < p; ++k) v *= base;
  }
  return v;
}

std::string Monomial::to_string() const {
  if (entries_.empty()) return "1";
  std::ostringstream os;
  bool first = true;
  for (const auto& [v, p] : entries_) {
    if (!first) os << '*';
    first = false;
    os << 'x' << v;
    if (p > 1) os << '^' << p;
  }
  return os.str();
}

bool GrlexLess::operator()(const Monomial& a, const Monomial& b) const {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  std::size_t i = 0;
  for (; i < ea.size() && i < eb.size(); ++i) {
    if (ea[i].first != eb[i].first) return ea[i].first < eb[i].first;
    if (ea[i].second != eb[i].second) return ea[i].second > eb[i].second;
  }
  // Same degree and one list is a prefix of the other cannot happen unless
  // both are equal.
  return false;
}

// ---------------------------------------------------------------------------

Polynomial Polynomial::constant(std::size_t nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Monomial{}, c);
  return p;
}

Polynomial Polynomial::variable(std::size_t nvars, VarIndex v) {
  if (v >= nvars) throw InvalidInput("variable index out of range");
  Polynomial p(nvars);
  p.add_term(Monomial::variable(v), 1.0);
  return p;
}

Polynomial Polynomial::monomial(std::size_t nvars, const Monomial& m, double c) {
  Polynomial p(nvars);
  p.add_term(m, c);
  return p;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

std::uint32_t Polynomial::degree() const {
  // Terms are sorted by degree, so the last key carries the maximum.
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

std::vector<Monomial> Polynomial::support() const {
  std::vector<Monomial> s;
  s.reserve(terms_.size());
  for (const auto& [m, c] : terms_) s.push_back(m);
  return s;
}

std::vector<VarIndex> Polynomial::variables() const {
  std::vector<VarIndex> vars;
  for (const auto& [m, c] : terms_)
    for (const auto& e : m.entries()) vars.push_back(e.first);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kPruneTol) terms_.erase(it);
}

void Polynomial::check_same_universe(const Polynomial& o) const {
  if (nvars_ != o.nvars_) {
    throw InvalidInput("polynomial variable counts differ: " + std::to_string(nvars_) + " vs " +
                       std::to_string(o.nvars_));
  }
}

void Polynomial::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) < kPruneTol) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_same_universe(o);
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_same_universe(o);
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  for (auto& [m, c] : terms_) c *= s;
  prune();
  return *this;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  r += o;
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial r = *this;
  r -= o;
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r = *this;
  r *= s;
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  check_same_universe(o);
  // Accumulate without pruning, then prune once: intermediate cancellation
  // must not drop a term that later receives more mass.
  TermMap acc;
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : o.terms_) {
      auto [it, inserted] = acc.try_emplace(ma * mb, ca * cb);
      if (!inserted) it->second += ca * cb;
    }
  }
  Polynomial r(nvars_);
  r.terms_ = std::move(acc);
  r.prune();
  return r;
}

Polynomial Polynomial::pow(unsigned k) const {
  Polynomial r = constant(nvars_, 1.0);
  for (unsigned i = 0; i < k; ++i) r = r * *this;
  return r;
}

Polynomial Polynomial::grad(VarIndex v) const {
  Polynomial r(nvars_);
  for (const auto& [m, c] : terms_) {
    auto [mult, dm] = m.differentiate(v);
    if (mult > 0) r.add_term(dm, c * static_cast<double>(mult));
  }
  return r;
}

double Polynomial::evaluate(std::span<const double> x) const {
  if (x.size() < nvars_) throw InvalidInput("evaluation point has too few coordinates");
  double acc = 0.0;
  for (const auto& [m, c] : terms_) acc += c * m.evaluate(x);
  return acc;
}

Polynomial Polynomial::substitute(const std::vector<bool>& fixed,
                                  std::span<const double> values) const {
  Polynomial r(nvars_);
  std::vector<Monomial::Entry> kept;
  for (const auto& [m, c] : terms_) {
    double coeff = c;
    kept.clear();
    for (const auto& [v, p] : m.entries()) {
      if (v < fixed.size() && fixed[v]) {
        for (std::uint32_t k = 0; k < p; ++k) coeff *= values[v];
      } else {
        kept.emplace_back(v, p);
      }
    }
    r.add_term(Monomial::from_entries(kept), coeff);
  }
  return r;
}

Polynomial Polynomial::reindex(const std::vector<std::int64_t>& mapping,
                               std::size_t new_nvars) const {
  Polynomial r(new_nvars);
  std::vector<Monomial::Entry> entries;
  for (const auto& [m, c] : terms_) {
    entries.clear();
    for (const auto& [v, p] : m.entries()) {
      if (v >= mapping.size() || mapping[v] < 0 ||
          static_cast<std::size_t>(mapping[v]) >= new_nvars) {
        throw InvalidInput("reindex: variable " + std::to_string(v) + " has no target index");
      }
      entries.emplace_back(static_cast<VarIndex>(mapping[v]), p);
    }
    r.add_term(Monomial::from_entries(entries), c);
  }
  return r;
}

Polynomial Polynomial::widen(std::size_t new_nvars) const {
  if (new_nvars < nvars_) throw InvalidInput("widen: cannot shrink the variable universe");
  Polynomial r = *this;
  r.nvars_ = new_nvars;
  return r;
}

nlohmann::json Polynomial::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [m, c] : terms_) {
    nlohmann::json exps = nlohmann::json::object();
    for (const auto& [v, p] : m.entries()) exps[std::to_string(v)] = p;
    arr.push_back({{"exponents", exps}, {"coeff", c}});
  }
  return arr;
}

Polynomial Polynomial::from_json(const nlohmann::json& j, std::size_t nvars) {
  Polynomial r(nvars);
  for (const auto& term : j) {
    std::vector<Monomial::Entry> entries;
    for (const auto& [key, val] : term.at("exponents").items()) {
      const auto v = static_cast<VarIndex>(std::stoul(key));
      if (v >= nvars) throw InvalidInput("polynomial JSON references variable " + key);
      entries.emplace_back(v, val.get<std::uint32_t>());
    }
    r.add_term(Monomial::from_entries(std::move(entries)), term.at("coeff").get<double>());
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

void enumerate_degree(std::span<const VarIndex> vars, std::size_t start, std::uint32_t remaining,
                      std::vector<Monomial::Entry>& current, std::vector<Monomial>& out) {
  if (remaining == 0) {
    out.push_back(Monomial::from_entries(current));
    return;
  }
  if (start == vars.size()) return;
  // Larger powers of earlier variables first gives graded-lex order within
  // one degree.
  for (std::uint32_t p = remaining;; --p) {
    if (p > 0) current.emplace_back(vars[start], p);
    enumerate_degree(vars, start + 1, remaining - p, current, out);
    if (p > 0) current.pop_back();
    if (p == 0) break;
  }
}

}  // namespace

std::vector<Monomial> make_basis(std::span<const VarIndex> vars, int d) {
  if (vars.empty()) throw InvalidInput("make_basis: empty variable subset");
  if (d < 0) throw InvalidInput("make_basis: negative degree");
  std::vector<VarIndex> sorted(vars.begin(), vars.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidInput("make_basis: duplicate variable in subset");
  }
  std::vector<Monomial> basis;
  std::vector<Monomial::Entry> current;
  for (int deg = 0; deg <= d; ++deg) {
    enumerate_degree(sorted, 0, static_cast<std::uint32_t>(deg), current, basis);
  }
  return basis;
}

MomentVector::MomentVector() { values_[Monomial{}] = 1.0; }

void MomentVector::set(const Monomial& m, double value) {
  if (m.is_constant()) return;  // y_0 stays 1
  values_[m] = value;
}

double MomentVector::at(const Monomial& m) const {
  auto it = values_.find(m);
  if (it == values_.end()) throw MissingMoment("missing moment y_" + m.to_string());
  return it->second;
}

double apply_Ly(const MomentVector& y, const Polynomial& f) {
  double acc = 0.0;
  for (const auto& [m, c] : f.terms()) acc += c * y.at(m);
  return acc;
}

DegreeInfo degree_and_halfdeg(const Polynomial& f) {
  const auto deg = f.degree();
  return {deg, (deg + 1) / 2};
}

}  // namespace cpop
