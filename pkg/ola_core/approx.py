#!/usr/bin/env python
# -*- coding: utf-8 -*-

#
#   ola - Optimized Layerwise Approximation.
#   Distribution-aware polynomial replacement of activation functions
#   under a private-inference runtime budget.
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

"""
Gaussian-weighted least squares approximation in the orthonormal Hermite
basis.

All the integrals are computed in standardised coordinates
z = (x - mu) / sigma_eff, where the weight is the standard normal density.
Series are stored and evaluated in the basis, never in monomials.
"""

import logging
from functools import lru_cache
from math import sqrt, pi

import numpy as np
from scipy.special import ndtr, roots_hermitenorm

import ola_core.constants as c
from ola_core.util import OlaError, float_str


class ApproximationError(OlaError):
    """ Base class for the numerical errors of the approximation. """
    return_value = c.RV_NUMERIC


class QuadratureError(ApproximationError):
    """ Raised when a coefficient changes too much doubling the nodes.

    Inputs:
     - l -- Index of the first offending coefficient
     - coarse, fine -- The two estimates of that coefficient
    """

    def __init__(self, l, coarse, fine):
        self.l = l
        self.coarse = coarse
        self.fine = fine
        msg = ("Quadrature didn't converge for coefficient {0}: {1!r} with the "
               "default nodes, {2!r} with twice as many".format(l, coarse, fine))
        ApproximationError.__init__(self, msg)


class InconsistentQuadratureError(ApproximationError):
    """ Raised when the Parseval MSE is negative beyond the clamp. """
    pass


class InvalidApproximationInput(OlaError, ValueError):
    """ Raised for weights, degrees, tables or series out of their domain. """
    return_value = c.RV_BAD_INPUT


class GaussianWeight:
    """ The normal density N(mu, (r sigma)^2) used as approximation weight.

    Inputs:
     - mu -- Mean of the layer inputs
     - sigma -- Standard deviation of the layer inputs, > 0
     - r -- Scale ratio, >= 1, widens the weight to care about the tails

    """

    def __init__(self, mu, sigma, r=1.0):
        mu, sigma, r = float(mu), float(sigma), float(r)
        if not np.isfinite(mu):
            raise InvalidApproximationInput("mu must be finite, got {0}".format(mu))
        if not (np.isfinite(sigma) and sigma > 0):
            raise InvalidApproximationInput("sigma must be > 0, got {0}".format(sigma))
        if not (np.isfinite(r) and r >= 1):
            raise InvalidApproximationInput("r must be >= 1, got {0}".format(r))
        self.mu = mu
        self.sigma = sigma
        self.r = r

    @property
    def sigma_eff(self):
        """ Standard deviation actually used for fitting. """
        return self.r * self.sigma

    def scaled(self, r):
        """ Same distribution, another scale ratio. """
        return GaussianWeight(self.mu, self.sigma, r)

    def __eq__(self, other):
        return (isinstance(other, GaussianWeight) and
                (self.mu, self.sigma, self.r) == (other.mu, other.sigma, other.r))

    def __hash__(self):
        return hash((self.mu, self.sigma, self.r))

    def __repr__(self):
        return "GaussianWeight(mu={0!r}, sigma={1!r}, r={2!r})".format(self.mu, self.sigma, self.r)


class ScalarActivation:
    """ A scalar activation function, evaluated elementwise.

    Inputs:
     - kind -- One of the ACT_* constants
     - table -- For ACT_TABULATED, a list of (x, f(x)) pairs strictly
                increasing in x. Values are interpolated linearly between
                points and held constant beyond the ends.

    """

    def __init__(self, kind, table=None):
        if kind not in c.ACTIVATION_KINDS:
            raise InvalidApproximationInput("Unknown activation: {0!r}".format(kind))
        self.kind = kind
        self.table = None
        if kind == c.ACT_TABULATED:
            if not table or len(table) < 2:
                raise InvalidApproximationInput("A tabulated activation needs at least two points")
            t = np.array(table, dtype=float)
            if t.ndim != 2 or t.shape[1] != 2 or not np.all(np.isfinite(t)):
                raise InvalidApproximationInput("Table points must be finite (x, f(x)) pairs")
            if np.any(np.diff(t[:, 0]) <= 0):
                raise InvalidApproximationInput("Table must be strictly increasing in x")
            t.flags.writeable = False
            self.table = t

    @classmethod
    def relu(cls):
        return cls(c.ACT_RELU)

    @classmethod
    def gelu(cls):
        return cls(c.ACT_GELU)

    @classmethod
    def identity(cls):
        return cls(c.ACT_IDENTITY)

    @classmethod
    def tabulated(cls, points):
        return cls(c.ACT_TABULATED, points)

    @property
    def breakpoints(self):
        """ Points where the quadrature is split.

        The kinks of ReLU and of tabulated tables, and the transition point
        of GELU, which is ReLU plus a correction kinked at 0.
        """
        if self.kind in (c.ACT_RELU, c.ACT_GELU):
            return [0.0]
        if self.kind == c.ACT_TABULATED:
            return list(self.table[:, 0])
        return []

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == c.ACT_RELU:
            return np.maximum(x, 0.0)
        elif self.kind == c.ACT_GELU:
            return x * ndtr(x)
        elif self.kind == c.ACT_IDENTITY:
            return x.copy()
        return np.interp(x, self.table[:, 0], self.table[:, 1])

    def derivative(self, x):
        """ Elementwise derivative, the right-hand one is not used at kinks: 0 there. """
        x = np.asarray(x, dtype=float)
        if self.kind == c.ACT_RELU:
            return np.where(x > 0, 1.0, 0.0)
        elif self.kind == c.ACT_GELU:
            return ndtr(x) + x * np.exp(-0.5 * x * x) / sqrt(2 * pi)
        elif self.kind == c.ACT_IDENTITY:
            return np.ones_like(x)
        xs, ys = self.table[:, 0], self.table[:, 1]
        slopes = np.diff(ys) / np.diff(xs)
        seg = np.searchsorted(xs, x, side='right') - 1
        inside = (seg >= 0) & (seg < len(slopes)) & (x > xs[0])
        return np.where(inside, slopes[np.clip(seg, 0, len(slopes) - 1)], 0.0)

    def to_json(self):
        if self.kind == c.ACT_TABULATED:
            return {c.ACT_TABULATED: self.table.tolist()}
        return self.kind

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, dict) and c.ACT_TABULATED in obj:
            return cls.tabulated(obj[c.ACT_TABULATED])
        return cls(obj)

    def __eq__(self, other):
        if not isinstance(other, ScalarActivation) or self.kind != other.kind:
            return False
        if self.table is None:
            return other.table is None
        return other.table is not None and np.array_equal(self.table, other.table)

    def __repr__(self):
        return "ScalarActivation({0!r})".format(self.kind)


class HermiteSeries:
    """ A polynomial stored in the shifted and scaled orthonormal Hermite basis.

    p(x) = sum_l coeffs[l] * h_l((x - mu) / sigma_eff)

    The coefficient array is read only, series are immutable.
    """

    def __init__(self, mu, sigma_eff, coeffs):
        coeffs = np.array(coeffs, dtype=float).ravel()
        if len(coeffs) == 0:
            raise InvalidApproximationInput("A series needs at least one coefficient")
        if len(coeffs) - 1 > c.MAX_DEGREE:
            raise InvalidApproximationInput("Degree {0} is above the maximum "
                                            "supported degree {1}".format(len(coeffs) - 1, c.MAX_DEGREE))
        if not np.all(np.isfinite(coeffs)):
            raise InvalidApproximationInput("Series coefficients must be finite")
        if not (np.isfinite(sigma_eff) and sigma_eff > 0):
            raise InvalidApproximationInput("sigma_eff must be > 0, got {0}".format(sigma_eff))
        coeffs.flags.writeable = False
        self.mu = float(mu)
        self.sigma_eff = float(sigma_eff)
        self.coeffs = coeffs

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        return eval_series(self, x)

    def truncate(self, d):
        """ The same series cut at degree d. """
        if not 0 <= d <= self.degree:
            raise InvalidApproximationInput("Can't truncate a degree {0} series "
                                            "at {1}".format(self.degree, d))
        return HermiteSeries(self.mu, self.sigma_eff, self.coeffs[:d + 1])

    def derivative(self):
        """ The derivative d/dx as a series of one degree less.

        Uses h_l' = sqrt(l) h_{l-1} and the chain rule on the standardisation.
        """
        if self.degree == 0:
            return HermiteSeries(self.mu, self.sigma_eff, [0.0])
        l = np.arange(1, self.degree + 1)
        return HermiteSeries(self.mu, self.sigma_eff,
                             self.coeffs[1:] * np.sqrt(l) / self.sigma_eff)

    def to_json(self):
        return {"mu": float_str(self.mu),
                "sigma_eff": float_str(self.sigma_eff),
                "coeffs": [float_str(x) for x in self.coeffs]}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj["mu"]), float(obj["sigma_eff"]),
                   [float(x) for x in obj["coeffs"]])

    def __eq__(self, other):
        return (isinstance(other, HermiteSeries) and self.mu == other.mu and
                self.sigma_eff == other.sigma_eff and
                np.array_equal(self.coeffs, other.coeffs))

    def __repr__(self):
        return "HermiteSeries(mu={0!r}, sigma_eff={1!r}, degree={2})".format(
            self.mu, self.sigma_eff, self.degree)


class MseReport:
    """ Minimised MSE for several degrees of the same (f, weight).

    Inputs:
     - by_degree -- dict degree -> MSE
     - total_energy -- <f, f> under the weight
    """

    def __init__(self, by_degree, total_energy):
        self.by_degree = dict(sorted(by_degree.items()))
        self.total_energy = float(total_energy)

    def __getitem__(self, d):
        return self.by_degree[d]

    def __iter__(self):
        return iter(self.by_degree)

    def to_json(self):
        return {"by_degree": {str(d): v for d, v in self.by_degree.items()},
                "total_energy": self.total_energy}


def hermite_ortho(l, x):
    """ The degree l orthonormal Hermite polynomial at a single point.

    h_0 = 1, h_1(x) = x, h_{l+1} = (x h_l - sqrt(l) h_{l-1}) / sqrt(l + 1)
    """

    if l < 0:
        raise InvalidApproximationInput("Negative degree: {0}".format(l))
    x = float(x)
    prev, cur = 1.0, x
    if l == 0:
        return prev
    for k in range(1, l):
        prev, cur = cur, (x * cur - sqrt(k) * prev) / sqrt(k + 1)
    return cur


def hermite_basis(d, z):
    """ All of h_0..h_d at the points z, shape (d + 1,) + z.shape. """

    z = np.asarray(z, dtype=float)
    H = np.empty((d + 1,) + z.shape)
    H[0] = 1.0
    if d >= 1:
        H[1] = z
    for l in range(1, d):
        H[l + 1] = (z * H[l] - sqrt(l) * H[l - 1]) / sqrt(l + 1)
    return H


@lru_cache(maxsize=None)
def _gauss_hermite(n):
    """ Nodes and weights for the standard normal density. """
    z, w = roots_hermitenorm(n)
    return z, w / sqrt(2 * pi)


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def quadrature_rule(f, w, nodes=c.QUADRATURE_NODES):
    """ Quadrature rule for integrals against the weight, in standardised z.

    Inputs:
     - f -- ScalarActivation, its breakpoints decide the rule
     - w -- GaussianWeight
     - nodes -- Gauss-Hermite nodes, or Gauss-Legendre nodes per piece

    Return:
     - z, weights -- Arrays, sum(weights * g(z)) approximates E[g(Z)], Z ~ N(0, 1)

    Without breakpoints this is plain Gauss-Hermite. Otherwise the line is
    cut at the breakpoints (in z) and each piece, truncated at
    QUADRATURE_HALF_RANGE, gets a Gauss-Legendre rule times the density.
    """

    if not f.breakpoints:
        return _gauss_hermite(nodes)

    H = c.QUADRATURE_HALF_RANGE
    cuts = sorted(set((b - w.mu) / w.sigma_eff for b in f.breakpoints))
    edges = [-H] + [b for b in cuts if -H < b < H] + [H]
    t, wt = _gauss_legendre(nodes)
    zs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        z = half * t + 0.5 * (b + a)
        zs.append(z)
        ws.append(half * wt * np.exp(-0.5 * z * z) / sqrt(2 * pi))
    return np.concatenate(zs), np.concatenate(ws)


def _project(f, w, d, nodes):
    """ Projection coefficients and <f, f> with a given node count. """

    z, wts = quadrature_rule(f, w, nodes)
    fz = f(w.mu + w.sigma_eff * z)
    coeffs = hermite_basis(d, z) @ (wts * fz)
    energy = float(np.sum(wts * fz * fz))
    return coeffs, energy


def fit(f, w, d, nodes=c.QUADRATURE_NODES, rel_tol=c.QUADRATURE_REL_TOL):
    """ Best degree d approximation of f in the weighted L2 sense.

    Inputs:
     - f -- ScalarActivation
     - w -- GaussianWeight, the fit uses sigma_eff = r * sigma
     - d -- Degree, 0..MAX_DEGREE
     - nodes -- Quadrature nodes, the estimate is checked against twice as many
     - rel_tol -- Allowed change of a coefficient, relative to the norm of
                  the coefficient vector, when the nodes are doubled

    Return:
     - HermiteSeries with c_l = E[f(X) h_l((X - mu) / sigma_eff)]

    """

    if not 0 <= d <= c.MAX_DEGREE:
        raise InvalidApproximationInput("Degree must be in [0, {0}], "
                                        "got {1}".format(c.MAX_DEGREE, d))
    coarse, _ = _project(f, w, d, nodes)
    fine, _ = _project(f, w, d, 2 * nodes)
    scale = sqrt(float(np.sum(fine * fine)))
    bad = np.nonzero(np.abs(coarse - fine) > rel_tol * scale)[0]
    if len(bad):
        l = int(bad[0])
        raise QuadratureError(l, float(coarse[l]), float(fine[l]))
    logging.debug("Fitted %s at degree %d with %s", f, d, w)
    return HermiteSeries(w.mu, w.sigma_eff, coarse)


def eval_series(p, x):
    """ Evaluate the series at x, accumulating term by term.

    Uses the three term recurrence of hermite_ortho, one basis function
    alive at a time, so it works for big arrays and high degrees.
    """

    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma_eff
    cf = p.coeffs
    prev = np.ones_like(z)
    total = cf[0] * prev
    if p.degree >= 1:
        cur = z
        total = total + cf[1] * cur
        for l in range(1, p.degree):
            prev, cur = cur, (z * cur - sqrt(l) * prev) / sqrt(l + 1)
            total = total + cf[l + 1] * cur
    return total


def _check_series(w, p):
    if p.mu != w.mu or p.sigma_eff != w.sigma_eff:
        raise InvalidApproximationInput("The series was not fitted with {0!r}".format(w))


def energy(f, w, nodes=c.QUADRATURE_NODES):
    """ <f, f> under the weight. """

    z, wts = quadrature_rule(f, w, nodes)
    fz = f(w.mu + w.sigma_eff * z)
    return float(np.sum(wts * fz * fz))


def _clamp_mse(value):
    if value < -c.MSE_CLAMP:
        raise InconsistentQuadratureError("Parseval MSE is {0!r}, below "
                                          "-{1}".format(value, c.MSE_CLAMP))
    return max(value, 0.0)


def mse(f, w, p, nodes=c.QUADRATURE_NODES):
    """ Minimised MSE of the fitted series, in Parseval form.

    E = <f, f> - sum_l c_l^2, clamped at 0 when slightly negative.
    """

    _check_series(w, p)
    return _clamp_mse(energy(f, w, nodes) - float(np.sum(p.coeffs * p.coeffs)))


def direct_mse(f, w, p, nodes=c.QUADRATURE_NODES):
    """ E[(f - p)^2] by direct quadrature, the cross-check of mse(). """

    _check_series(w, p)
    z, wts = quadrature_rule(f, w, nodes)
    x = w.mu + w.sigma_eff * z
    r = f(x) - eval_series(p, x)
    return float(np.sum(wts * r * r))


def mean_residual(f, w, p, nodes=c.QUADRATURE_NODES):
    """ E[f - p] under the weight, zero up to quadrature error. """

    _check_series(w, p)
    z, wts = quadrature_rule(f, w, nodes)
    x = w.mu + w.sigma_eff * z
    return float(np.sum(wts * (f(x) - eval_series(p, x))))


def mse_report(f, w, degrees, nodes=c.QUADRATURE_NODES):
    """ MSE for every degree in degrees with one single fit.

    The coefficients of a lower degree fit are a prefix of the higher
    degree ones, so E(d) = <f, f> - sum_{l <= d} c_l^2.

    Return:
     - MseReport, series -- The report and the fitted series at max(degrees)
    """

    degrees = sorted(set(int(d) for d in degrees))
    p = fit(f, w, degrees[-1], nodes)
    total = energy(f, w, nodes)
    partial = np.cumsum(p.coeffs * p.coeffs)
    by_degree = {}
    last = total
    for d in degrees:
        # keep it non increasing even after clamping
        last = min(last, _clamp_mse(total - float(partial[d])))
        by_degree[d] = last
    return MseReport(by_degree, total), p
