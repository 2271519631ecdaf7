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
Per layer latency profiles T_i(d), their discretisation into integer
costs tau_i(d) = round(T_i(d) / nu), and the degree search space.
"""

import csv
import logging
import math
from os.path import dirname, join

import ola_core.constants as c
from ola_core.util import OlaError, DegreeLookupError


class ProfileError(OlaError):
    """ Base class for unusable runtime profiles. """
    return_value = c.RV_BAD_PROFILE


class MissingDegreeError(ProfileError):
    """ A layer of the profile doesn't cover every degree of the space. """
    pass


class NonMonotoneProfileError(ProfileError):
    """ A layer's latency decreases when the degree increases. """
    pass


class NonPositiveLatencyError(ProfileError):
    """ A latency is zero, negative or not a number. """
    pass


class DiscretizationError(ProfileError):
    """ The discretisation unit is not > 0. """
    pass


class DegreeSpace:
    """ Candidate degrees S, strictly increasing, all in [1, MAX_DEGREE].

    The sentinel SENTINEL_DEGREE (no affordable degree) is always
    logically present for the optimizer and is not stored in degrees.
    """

    def __init__(self, degrees=None):
        degrees = list(c.DEFAULT_DEGREES if degrees is None else degrees)
        if not degrees:
            raise ValueError("The degree space can't be empty")
        for a, b in zip(degrees[:-1], degrees[1:]):
            if b <= a:
                raise ValueError("Degrees must be strictly increasing: {0}".format(degrees))
        if degrees[0] < 1 or degrees[-1] > c.MAX_DEGREE:
            raise ValueError("Degrees must be in [1, {0}]: {1}".format(c.MAX_DEGREE, degrees))
        self.degrees = tuple(int(d) for d in degrees)

    @classmethod
    def parse(cls, text):
        """ From a comma separated list, as given to --degrees. """
        try:
            return cls([int(t) for t in text.split(",") if t.strip()])
        except ValueError as e:
            raise ValueError("Bad degree list {0!r}: {1}".format(text, e))

    @property
    def with_sentinel(self):
        """ (SENTINEL_DEGREE,) + degrees, the order used by the optimizer. """
        return (c.SENTINEL_DEGREE,) + self.degrees

    def __iter__(self):
        return iter(self.degrees)

    def __len__(self):
        return len(self.degrees)

    def __contains__(self, d):
        return d in self.degrees

    @property
    def max(self):
        return self.degrees[-1]

    def __eq__(self, other):
        return isinstance(other, DegreeSpace) and self.degrees == other.degrees

    def __repr__(self):
        return "DegreeSpace({0})".format(list(self.degrees))


class RuntimeProfile:
    """ Measured latency in seconds per layer and degree.

    Inputs:
     - per_layer -- List of dicts degree -> seconds, one per layer
     - first_layer_no_bootstrap -- The first layer skips bootstrapping
     - synthetic -- True when generated by synthetic_profile(), never a measurement
     - space -- DegreeSpace the profile has to cover

    """

    def __init__(self, per_layer, first_layer_no_bootstrap=True, synthetic=False,
                 space=None):
        space = space or DegreeSpace()
        if not per_layer:
            raise MissingDegreeError("The profile has no layers")
        for i, row in enumerate(per_layer):
            missing = [d for d in space if d not in row]
            if missing:
                raise MissingDegreeError("Layer {0} has no latency for degree(s) "
                                         "{1}".format(i + 1, missing))
            for d, t in row.items():
                if not (math.isfinite(t) and t > 0):
                    raise NonPositiveLatencyError("Layer {0} degree {1}: latency {2} "
                                                  "is not > 0".format(i + 1, d, t))
            ds = sorted(row)
            for a, b in zip(ds[:-1], ds[1:]):
                if row[b] < row[a]:
                    raise NonMonotoneProfileError("Layer {0}: T({1}) = {2} is below "
                                                  "T({3}) = {4}".format(i + 1, b, row[b],
                                                                        a, row[a]))
        self.per_layer = tuple(dict(sorted(row.items())) for row in per_layer)
        self.first_layer_no_bootstrap = first_layer_no_bootstrap
        self.synthetic = synthetic
        self.space = space

    def __len__(self):
        return len(self.per_layer)

    def __getitem__(self, i):
        return self.per_layer[i]


class DiscreteCostTable:
    """ Integer costs tau_i(d) for the unit nu, tau_i(SENTINEL_DEGREE) = 0. """

    def __init__(self, nu, per_layer):
        self.nu = nu
        self.per_layer = tuple(per_layer)

    def __len__(self):
        return len(self.per_layer)

    def __getitem__(self, i):
        return self.per_layer[i]

    def cost(self, layer, d):
        """ tau for a 0-based layer index. """
        try:
            return self.per_layer[layer][d]
        except KeyError:
            raise DegreeLookupError(layer + 1, d)

    def to_json(self):
        return {"nu": self.nu,
                "per_layer": [{str(d): t for d, t in row.items()}
                              for row in self.per_layer]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["nu"], [{int(d): int(t) for d, t in row.items()}
                               for row in obj["per_layer"]])


def load_profile(path, space=None):
    """ Read a profile CSV.

    Lines starting with '#' are comments. The header row is
    'layer,degree,seconds' and there is one row per (layer, degree),
    layers numbered from 1. A profile whose header comments contain the
    word 'synthetic' is flagged as synthetic.
    """

    per_layer = {}
    synthetic = False
    with open(path, 'r', newline='') as f:
        lines = []
        for line in f:
            if line.startswith("#"):
                synthetic = synthetic or "synthetic" in line.lower()
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingDegreeError("{0} is empty".format(path))
    if header != c.PROFILE_HEADER:
        raise ProfileError("Expected header {0}, got {1}".format(",".join(c.PROFILE_HEADER),
                                                                 ",".join(header)))
    for n, row in enumerate(reader):
        try:
            layer, degree, seconds = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise ProfileError("Bad row {0} in {1}: {2}".format(n + 2, path, row))
        per_layer.setdefault(layer, {})[degree] = seconds

    layers = sorted(per_layer)
    if layers != list(range(1, len(layers) + 1)):
        raise MissingDegreeError("Layers must be numbered 1..N, found {0}".format(layers))
    rows = [per_layer[l] for l in layers]
    # a first layer cheaper than the second everywhere skipped bootstrapping
    no_bootstrap = len(rows) < 2 or all(t < rows[1].get(d, float("inf"))
                                        for d, t in rows[0].items())
    logging.debug("Loaded a profile with %d layers from %s", len(layers), path)
    return RuntimeProfile(rows, no_bootstrap, synthetic=synthetic, space=space)


def save_profile(profile, path, comments=()):
    with open(path, 'w', newline='') as f:
        for line in comments:
            f.write("# {0}\n".format(line))
        w = csv.writer(f, lineterminator='\n')
        w.writerow(c.PROFILE_HEADER)
        for i, row in enumerate(profile.per_layer):
            for d, t in row.items():
                w.writerow([i + 1, d, repr(t)])


def depth(d):
    """ Multiplicative depth of a degree d polynomial, ceil(log2(d + 1)). """
    return (int(d)).bit_length()


def synthetic_profile(n_layers, space=None, first_layer_no_bootstrap=True):
    """ The bundled synthetic profile, shaped like measured RNS-CKKS latencies.

    T_1(d) = c_eval sqrt(d) (no bootstrapping) and
    T_i(d) = c_boot[depth(d)] + c_eval sqrt(d) for i >= 2, with c_boot a step
    table increasing in depth. Bootstrapping dominates and latency jumps
    between 2^m - 1 and 2^m. With first_layer_no_bootstrap False the first
    layer pays for bootstrapping like the others.
    """

    space = space or DegreeSpace()
    rest = {d: c.SYNTHETIC_BOOT_COST[depth(d)] + c.SYNTHETIC_EVAL_COST * math.sqrt(d)
            for d in space}
    if first_layer_no_bootstrap:
        first = {d: c.SYNTHETIC_EVAL_COST * math.sqrt(d) for d in space}
    else:
        first = dict(rest)
    per_layer = [first] + [dict(rest) for _ in range(n_layers - 1)]
    return RuntimeProfile(per_layer, first_layer_no_bootstrap, synthetic=True, space=space)


def synthetic_comments(first_layer_no_bootstrap=True):
    """ Header lines describing the synthetic profile constants. """

    boot = ", ".join("{0}: {1}".format(k, v) for k, v in sorted(c.SYNTHETIC_BOOT_COST.items()))
    first = ("T_1(d) = c_eval * sqrt(d); " if first_layer_no_bootstrap else "")
    rest = "i >= 2" if first_layer_no_bootstrap else "every i"
    return ["SYNTHETIC runtime profile, not a measurement.",
            first + "T_i(d) = c_boot[ceil(log2(d + 1))] + c_eval * sqrt(d), " + rest,
            "c_eval = {0}".format(c.SYNTHETIC_EVAL_COST),
            "c_boot = {{{0}}}".format(boot)]


def bundled_profile_path():
    return join(dirname(dirname(__file__)), "data", c.BUNDLED_PROFILE)


def discretize(profile, nu=c.DEFAULT_NU):
    """ tau_i(d) = round(T_i(d) / nu), half to even, plus tau_i(-1) = 0. """

    if not (math.isfinite(nu) and nu > 0):
        raise DiscretizationError("nu must be > 0, got {0}".format(nu))
    per_layer = []
    for row in profile.per_layer:
        # round() on floats is half to even
        costs = {c.SENTINEL_DEGREE: 0}
        costs.update({d: int(round(t / nu)) for d, t in row.items()})
        per_layer.append(costs)
    return DiscreteCostTable(nu, per_layer)


def total_cost(table, degrees):
    """ tau(d) = sum_i tau_i(d_i). """

    if len(degrees) != len(table):
        raise ValueError("Expected {0} degrees, got {1}".format(len(table), len(degrees)))
    return sum(table.cost(i, d) for i, d in enumerate(degrees))
