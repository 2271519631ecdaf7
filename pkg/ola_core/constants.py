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



################
# Return values
################

RV_OK = 0  # everything went fine
RV_CRASH = 1  # crash or end unexpectedly
# RV_WRONG_COMMAND = 2  # argparse uses this value by default
RV_BAD_CONFIG = 3  # the configuration didn't pass validation
RV_BAD_INPUT = 4  # model, dataset, tables or degree vectors are wrong
RV_BAD_PROFILE = 5  # the runtime profile is unusable
RV_NUMERIC = 6  # quadrature, gradients or forward passes went non-finite
RV_BOUND_UNREACHABLE = 7  # no budget keeps the accuracy bound, report written anyway



# --------------------
# Activation related:
# --------------------
ACT_RELU = "relu"
ACT_GELU = "gelu"
ACT_IDENTITY = "identity"
ACT_TABULATED = "tabulated"

ACTIVATION_KINDS = [ACT_RELU, ACT_GELU, ACT_IDENTITY, ACT_TABULATED]



# ----------------------
# Approximation related:
# ----------------------
MAX_DEGREE = 255

# Gauss-Hermite node count and the doubling check
QUADRATURE_NODES = 512
QUADRATURE_REL_TOL = 1e-10

# Standardised half-range integrals are truncated here, the normal
# density underflows to zero before it
QUADRATURE_HALF_RANGE = 40.0

# Parseval MSE in [-MSE_CLAMP, 0) is clamped to 0
MSE_CLAMP = 1e-9

# |E[f - p]| tolerance for the mean-zero residual
MEAN_RESIDUAL_TOL = 1e-8

# Significant digits used when writing coefficients
SERIES_DIGITS = 17



# ----------------
# Runtime related:
# ----------------
# Candidate degrees: 2^m - 1 plus the three fill-in degrees
DEFAULT_DEGREES = [3, 7, 15, 31, 63, 88, 127, 154, 210, 255]

# Degree used for a layer that got no affordable degree at all
SENTINEL_DEGREE = -1

DEFAULT_NU = 0.25

PROFILE_HEADER = ["layer", "degree", "seconds"]

# Synthetic profile: T_1(d) = c_eval * sqrt(d),
# T_i(d) = c_boot[ceil(log2(d + 1))] + c_eval * sqrt(d) for i >= 2
SYNTHETIC_EVAL_COST = 0.35
SYNTHETIC_BOOT_COST = {1: 8.6,
                       2: 9.0,
                       3: 9.6,
                       4: 10.3,
                       5: 11.1,
                       6: 12.0,
                       7: 13.0,
                       8: 14.1
                       }

BUNDLED_PROFILE = "synthetic_profile_19.csv"



# ------------------
# Optimizer related:
# ------------------
# Enumeration guard for the brute force oracle
BRUTE_FORCE_LIMIT = 10 ** 6

DEFAULT_ACC_DROP_PCT = 1.0

# 1.0, 1.25, ..., 4.0
DEFAULT_R_GRID = [1.0 + 0.25 * i for i in range(13)]

# Weight shared by every layer in the fixed-distribution uniform baseline,
# N(0, 2) with 2 the variance
UNIFORM_WLS_MU = 0.0
UNIFORM_WLS_VARIANCE = 2.0



# ------------------------
# Net / toy task related:
# ------------------------
# Fixed chunk size for dataset scans, independent of the worker count
SCAN_CHUNK_SIZE = 256

# Environment variable capping the number of worker processes
THREADS_ENV = "OLA_THREADS"

TOY_SAMPLES = 2000
TOY_CLASSES = 4
TOY_FEATURES = 2
TOY_HIDDEN = [32, 24, 16]
TOY_HEAVY_TAIL_FRACTION = 0.03
TOY_HEAVY_TAIL_SCALE = 4.0

TRAIN_EPOCHS = 60
TRAIN_LEARNING_RATE = 0.05
TRAIN_BATCH_SIZE = 32

# Degree installed by the region probe
PROBE_DEGREE = 15
