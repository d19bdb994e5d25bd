#pragma once

#include "nnreach/expr.hpp"
#include "nnreach/interval.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace nnreach {

inline constexpr unsigned kMaxTaylorOrder = 8;

class DomainMismatch : public std::invalid_argument {
public:
    DomainMismatch() : std::invalid_argument("Taylor models live on different domains") {}
};

/// Graded list of monomials in n variables with total degree <= order.
/// Variables flagged in `nonneg_mask` range over [0,1], all others over
/// [-1,1]. Instances are interned; compare by pointer.
class MonomialBasis {
public:
    static std::shared_ptr<const MonomialBasis> get(unsigned n_vars, unsigned order, std::uint64_t nonneg_mask = 0);

    unsigned n_vars() const { return n_; }
    unsigned order() const { return order_; }
    std::uint64_t nonneg_mask() const { return mask_; }
    bool nonneg_var(unsigned v) const { return (mask_ >> v) & 1u; }
    std::size_t size() const { return degree_.size(); }

    std::span<const std::uint8_t> exponents(std::size_t i) const { return {exps_.data() + i * n_, n_}; }
    unsigned degree(std::size_t i) const { return degree_[i]; }
    /// -1 if the exponent tuple is not in the basis.
    long index_of(std::span<const std::uint8_t> e) const;
    /// Index of monomial i times monomial j, or kTruncated / kTruncatedNonneg
    /// when the product exceeds the order.
    int product(std::size_t i, std::size_t j) const { return product_[i * size() + j]; }
    /// Range of monomial i over the domain is within [0,1] (else [-1,1]).
    bool nonneg_term(std::size_t i) const { return nonneg_[i]; }
    Interval term_range(std::size_t i) const { return nonneg_[i] ? Interval(0.0, 1.0) : Interval(-1.0, 1.0); }

    static constexpr int kTruncated = -1;
    static constexpr int kTruncatedNonneg = -2;

    MonomialBasis(unsigned n_vars, unsigned order, std::uint64_t nonneg_mask);

private:
    std::uint64_t key(std::span<const std::uint8_t> e) const;

    unsigned n_;
    unsigned order_;
    std::uint64_t mask_;
    std::vector<std::uint8_t> exps_;
    std::vector<unsigned> degree_;
    std::vector<bool> nonneg_;
    std::vector<std::uint64_t> keys_;  // sorted copy for lookup
    std::vector<std::uint32_t> key_index_;
    std::vector<int> product_;
};

using BasisPtr = std::shared_ptr<const MonomialBasis>;

/// Polynomial over the basis domain plus an interval remainder. Rounding
/// errors of the coefficient arithmetic are folded into the remainder.
class TaylorModel {
public:
    TaylorModel();
    explicit TaylorModel(BasisPtr basis, double c = 0.0);

    static TaylorModel constant(BasisPtr basis, const Interval& c);
    static TaylorModel variable(BasisPtr basis, unsigned var);

    const BasisPtr& basis() const { return basis_; }
    unsigned n_vars() const { return basis_->n_vars(); }
    unsigned order() const { return basis_->order(); }

    std::span<const double> coeffs() const { return coeffs_; }
    double coeff(std::size_t i) const { return coeffs_[i]; }
    void set_coeff(std::size_t i, double v) { coeffs_[i] = v; }
    double constant_term() const { return coeffs_[0]; }
    const Interval& remainder() const { return rem_; }
    void set_remainder(const Interval& r) { rem_ = r; }
    bool is_constant() const;

    /// Coefficient-sum enclosure of the polynomial part alone.
    Interval poly_bound() const;
    /// Enclosure of the represented function over the whole domain.
    Interval bound() const;
    /// bound() tightened by pinning variables in which the polynomial is
    /// monotone to the matching domain endpoint.
    Interval refined_bound() const;
    /// Enclosure of the value at a domain point.
    Interval eval(std::span<const double> point) const;

    TaylorModel& operator+=(const TaylorModel& o);
    TaylorModel& operator-=(const TaylorModel& o);
    TaylorModel& operator*=(double c);
    TaylorModel& operator+=(double c);

    /// Multiply by an interval constant (midpoint kept in the polynomial).
    TaylorModel scaled(const Interval& c) const;
    TaylorModel add_interval(const Interval& c) const;

    /// Antiderivative in the last variable, which must be the [0,1] time
    /// variable; real time is h times it.
    TaylorModel integrate_time(double h) const;
    /// Partial derivative in `var`, remainder dropped. For polynomial-only models.
    TaylorModel derivative(unsigned var) const;
    /// Fix variable `var` to `value` (within its domain).
    TaylorModel substitute(unsigned var, double value) const;
    /// Move into `target`: variable v maps to var_map[v], or is bounded into
    /// the remainder when var_map[v] < 0. Terms above target's order are
    /// bounded as well.
    TaylorModel rebase(const BasisPtr& target, std::span<const int> var_map) const;
    /// Keep the polynomial, fold everything of degree > `order` into the remainder.
    TaylorModel truncated(unsigned order) const;

    friend TaylorModel operator-(const TaylorModel& a);
    friend TaylorModel operator*(const TaylorModel& a, const TaylorModel& b);

private:
    void require_same(const TaylorModel& o) const;

    BasisPtr basis_;
    std::vector<double> coeffs_;
    Interval rem_;
};

TaylorModel operator+(TaylorModel a, const TaylorModel& b);
TaylorModel operator-(TaylorModel a, const TaylorModel& b);
TaylorModel operator*(TaylorModel a, double c);
TaylorModel operator*(double c, TaylorModel a);
TaylorModel operator+(TaylorModel a, double c);
TaylorModel operator-(TaylorModel a, double c);
TaylorModel operator+(double c, TaylorModel a);
TaylorModel operator-(double c, const TaylorModel& a);
TaylorModel operator/(const TaylorModel& a, const TaylorModel& b);

/// Enclosure of the k-th derivative of f over x.
Interval elem_derivative(Func f, unsigned k, const Interval& x);

/// f composed with a: Taylor expansion about the midpoint of a's range plus
/// a Lagrange remainder over the whole range.
TaylorModel compose_elem(const TaylorModel& a, Func f);
TaylorModel reciprocal(const TaylorModel& a);

// Carrier primitives used by CompiledExpr.
TaylorModel apply_func(Func f, const TaylorModel& a);
TaylorModel pow_int(const TaylorModel& a, unsigned n);

std::string to_string(const TaylorModel& a);

} // namespace nnreach
