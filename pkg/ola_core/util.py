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

import os
import traceback

import ola_core.constants as c


class OlaError(Exception):
    """ Base class for all the errors the program knows how to report.

    Every subclass names the value returned to the shell through
    return_value, see the RV_* constants.
    """
    return_value = c.RV_CRASH


class ConfigError(OlaError):
    """ Raised when the pipeline configuration is not valid. """
    return_value = c.RV_BAD_CONFIG


class DegreeLookupError(OlaError, KeyError):
    """ Raised when a degree has no entry in an MSE or cost table.

    Inputs:
     - layer -- 1-based layer index
     - degree -- The missing degree
    """
    return_value = c.RV_BAD_INPUT

    def __init__(self, layer, degree):
        OlaError.__init__(self, "Layer {0} has no entry for degree {1}".format(layer, degree))
        self.layer = layer
        self.degree = degree

    def __str__(self):
        return self.args[0]

    def __reduce__(self):
        return (DegreeLookupError, (self.layer, self.degree))


def get_str_from_traceback(ty, value, tb):
    """ The exception type on one line, then the formatted traceback. """

    return str(ty) + "\n" + "".join(traceback.format_exception(ty, value, tb))


def get_processes():
    """ Number of worker processes allowed by the environment.

    Reads OLA_THREADS, anything missing, unparsable or below 1 means 1,
    that is, no multiprocessing at all.
    """

    value = os.environ.get(c.THREADS_ENV, "")
    try:
        n = int(value)
    except ValueError:
        return 1
    return max(1, n)


def float_str(x):
    """ Decimal text for x that round-trips a double. """

    return "{0:.{1}g}".format(float(x), c.SERIES_DIGITS)


def json_float(x):
    """ A float ready for json, infinities become the string "inf". """

    x = float(x)
    if x == float("inf"):
        return "inf"
    return x


def float_from_json(x):
    return float("inf") if x == "inf" else float(x)


def entitle(text, level=0):
    """ Put the text in a title with lot's of hashes around it. """

    t = ''
    if level == 0:
        t += "\n"
        t += "{0:#^60}\n".format('')
        t += "{0:#^60}\n".format(' ' + text + ' ')
        t += "{0:#^60}\n".format('')
    else:
        t += "{0:-^60}\n".format(' ' + text + ' ')
    return t


def table(columns):
    """ Generates a text containing a pretty table.

    Input:
     - columns -- A list containing lists in which each one of the is a column
                 of the table. The first element of each column is its header.

    """

    # stores the size of the biggest element in that column
    ml = [max(len(str(e)) for e in col) for col in columns]

    # size of each word + 2 spaces, +1 for the separator | and +2 for the borders
    ml_total = sum(m + 2 for m in ml) + 1 + 2
    text = "-" * ml_total + "\n"
    # all the columns have the same number of rows
    for r in range(len(columns[0])):
        line = "|"
        for i, col in enumerate(columns):
            line += "{0: ^{width}}".format(str(col[r]), width=ml[i] + 2)
            # add a separator for the first column
            if i == 0:
                line += "|"
        text += line + "|" + "\n"
        if r == 0:
            text += "-" * ml_total + "\n"
    text += "-" * ml_total
    return text
