'''
Crash reports for the console script.
'''

import sys
import platform
import datetime

import numpy
import scipy

from .util import get_str_from_traceback
from .version import version_string


class CrashReport(object):
    '''
    Text report of an unexpected exception.

    Built from sys.exc_info() when no text is given, otherwise from the
    given text (the printable traceback of a worker process). The
    platform and the python, numpy and scipy versions go first.
    '''

    def __init__(self, error_str=None):
        if error_str is None:
            error_str = get_str_from_traceback(*sys.exc_info())
        self.traceback_str = error_str
        self.created = datetime.datetime.now()

    @property
    def environment_str(self):
        return ("ola {0}\npython {1}\nnumpy {2}, scipy {3}\n{4}\n".format(
            version_string, sys.version.replace("\n", " "), numpy.__version__,
            scipy.__version__, platform.platform()))

    @property
    def error_str(self):
        return self.environment_str + "\n" + self.traceback_str

    def save(self, filename=None):
        ''' Write the report, by default to a time stamped name. Return the name. '''
        if filename is None:
            filename = "ola_crash_{0:%Y%m%d_%H%M%S}.txt".format(self.created)
        with open(filename, 'w') as f:
            f.write(self.error_str)
        return filename
