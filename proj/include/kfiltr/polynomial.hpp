#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kfiltr/linalg.hpp"
#include "kfiltr/rational.hpp"

namespace kfiltr {

/// A fitted (quasi)polynomial: one coefficient list per residue class of k
/// modulo `period`. Period 1 is a true polynomial, which is what the
/// goodness-dependent invariants require. Coefficients are stored high
/// degree first.
struct WeightPolynomial {
  std::vector<QVec> classes;  // classes[k % period]
  int valid_from = 1;
  int period = 1;

  int degree() const { return static_cast<int>(classes.at(0).size()) - 1; }

  Rat eval(const Int& k) const {
    const Int r = ((k % period) + period) % period;
    return eval_polynomial(classes.at(static_cast<std::size_t>(r)), Rat(k));
  }

  /// Coefficient list; only meaningful for period 1.
  const QVec& coefficients() const {
    if (period != 1)
      throw Error(Errc::NotGood,
                  "weight quasipolynomial period " + std::to_string(period));
    return classes.front();
  }

  /// Coefficient of k^power (period-1 polynomials).
  Rat coeff(int power) const {
    const QVec& c = coefficients();
    const int d = degree();
    if (power < 0 || power > d) return Rat(0);
    return c[static_cast<std::size_t>(d - power)];
  }

  /// Leading coefficient. For quasipolynomials this is well defined only
  /// when all residue classes agree on it.
  Rat leading() const {
    const Rat lead = classes.front().front();
    for (const QVec& c : classes)
      if (c.front() != lead)
        throw Error(Errc::NotGood, "leading coefficient depends on k mod " +
                                       std::to_string(period));
    return lead;
  }
};

/// Fits a degree-`degree` quasipolynomial to the integer samples
/// sample(k), k = 1..max_k, trying periods 1..max_period and onsets 1..3.
/// Each residue class is interpolated on its first degree+1 samples and
/// verified exactly on every remaining one. Smaller periods are preferred,
/// then smaller onsets. Throws `failure` when nothing fits.
inline WeightPolynomial fit_quasipolynomial(
    const std::function<Int(int)>& sample, int degree, int window,
    int max_period, Errc failure, int max_onset = 3) {
  // Samples are extended lazily: a clean period-1 fit stops at `window`,
  // only quasipolynomial fallbacks pay for the longer tail.
  std::vector<Int> s(1);  // s[k] for k >= 1
  auto ensure = [&s, &sample](int max_k) {
    while (static_cast<int>(s.size()) <= max_k)
      s.push_back(sample(static_cast<int>(s.size())));
  };

  for (int q = 1; q <= max_period; ++q) {
    for (int onset = 1; onset <= max_onset; ++onset) {
      ensure(std::max(window, onset + q * (degree + 2)));
      const int max_k = static_cast<int>(s.size()) - 1;
      std::vector<QVec> classes(static_cast<std::size_t>(q));
      bool ok = true;
      for (int res = 0; res < q && ok; ++res) {
        std::vector<Rat> xs, ys;
        for (int k = onset; k <= max_k; ++k)
          if (k % q == res) {
            xs.emplace_back(k);
            ys.emplace_back(s[static_cast<std::size_t>(k)]);
          }
        if (static_cast<int>(xs.size()) < degree + 2) {
          ok = false;
          break;
        }
        std::vector<Rat> hx(xs.begin(), xs.begin() + degree + 1);
        std::vector<Rat> hy(ys.begin(), ys.begin() + degree + 1);
        auto coeffs = interpolate_polynomial(hx, hy, degree);
        if (!coeffs) {
          ok = false;
          break;
        }
        for (std::size_t i = static_cast<std::size_t>(degree) + 1;
             i < xs.size(); ++i)
          if (eval_polynomial(*coeffs, xs[i]) != ys[i]) {
            ok = false;
            break;
          }
        if (ok) classes[static_cast<std::size_t>(res)] = std::move(*coeffs);
      }
      if (ok) {
        WeightPolynomial w;
        w.classes = std::move(classes);
        w.valid_from = onset;
        w.period = q;
        return w;
      }
    }
  }
  throw Error(failure, "no (quasi)polynomial of degree " +
                           std::to_string(degree) + " with period <= " +
                           std::to_string(max_period) + " fits the samples");
}

}  // namespace kfiltr
