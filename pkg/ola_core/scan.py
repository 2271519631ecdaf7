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


import sys
import logging
import multiprocessing
from os.path import abspath
from traceback import extract_tb

from progressbar import ProgressBar, Bar, AdaptiveETA, SimpleProgress

import ola_core.constants as c
from ola_core.util import OlaError


class ChildProcessException(OlaError):
    """ Raised when a child process has problems.

    Inputs:
     - chunk_index -- Index of the dataset chunk the child was processing
     - exc_type -- Type of the exception being handled, extracted from sys.exc_info()
     - exc_class -- The exception instance, extracted from sys.exc_info()
     - tb_text -- The traceback text, extracted from traceback object from sys.exc_info()

    Stores all the info given by sys.exc_info() and the chunk that was being
    processed.

    """

    def __init__(self, chunk_index, exc_type, exc_class, tb_text):
        OlaError.__init__(self, "Exception while processing chunk {0}".format(chunk_index))
        self.chunk_index = chunk_index
        self.exc_type = exc_type
        self.exc_class = exc_class
        self.tb_text = tb_text

    @property
    def printable_traceback(self):
        """ Returns a nice printable traceback.

        It uses a lot of asteriks as indentation to ensure it doesn't mix with
        the main process traceback.

        """

        text = ""
        text += "*" * 10 + "\n"
        text += "*** Exception while processing dataset chunk:" + "\n"
        text += "*** " + str(self.chunk_index) + "\n"
        text += "*" * 10 + "\n"
        text += "*** Printing the child's traceback:" + "\n"
        text += "*** Exception:" + str(self.exc_type) + str(self.exc_class) + "\n"
        for tb in self.tb_text:
            text += "*" * 10 + "\n"
            text += "*** File {0}, line {1}, in {2} \n***   {3}".format(*tb)
        text += "\n" + "*" * 10 + "\n"

        return text

    def save_error_log(self, filename='error.log'):
        """ Save the error in filename, return the path. """

        with open(filename, 'w') as f:
            error_log_path = abspath(f.name)
            f.write("Error while processing chunk: {0}\n".format(self.chunk_index))
            f.write(self.printable_traceback)
            f.write('\n')

        return error_log_path


def _run_chunk(function, model, index, chunk):
    """ Run function on a chunk, never letting an exception escape.

    Known errors are returned as they are, anything else as a tuple with
    the traceback already extracted (traceback objects don't pickle).
    """

    try:
        return function(model, chunk)
    except KeyboardInterrupt:
        raise
    except OlaError as e:
        return ("error", index, e)
    except Exception:
        except_type, except_class, tb = sys.exc_info()
        return ("crash", index, (except_type, except_class, extract_tb(tb)))


def multiprocess_scan_chunk(job):
    """ Does the multiprocess stuff for scan_dataset """
    index, chunk = job
    return _run_chunk(multiprocess_scan_chunk.function,
                      multiprocess_scan_chunk.model, index, chunk)


def _mp_pool_init(d):
    """ Function to initialize the multiprocessing in scan_dataset.

    Inputs:
    - d -- Dictionary containing the information to copy to the function of the child process.

    """

    assert isinstance(d, dict)
    assert 'model' in d
    assert 'function' in d
    multiprocess_scan_chunk.model = d['model']
    multiprocess_scan_chunk.function = d['function']


def _unwrap(result):
    if isinstance(result, tuple) and len(result) == 3 and result[0] in ("error", "crash"):
        kind, index, payload = result
        if kind == "error":
            raise payload
        raise ChildProcessException(index, *payload)
    return result


def scan_dataset(model, dataset, function, processes=1, callback=None,
                 chunk_size=c.SCAN_CHUNK_SIZE):
    """ Apply function(model, chunk) to every chunk of the dataset.

    Inputs:
     - model -- NetModel, copied once to every worker
     - dataset -- Dataset, split in fixed chunks of chunk_size samples
     - function -- Module level function (it has to pickle)
     - processes -- Number of worker processes, 1 means no multiprocessing
     - callback -- Called as callback(done, total, result) after every chunk

    Return:
     - List with the results in chunk order. The chunk boundaries don't
       depend on processes, so reductions done in this order give the same
       numbers with any number of workers.

    """

    chunks = dataset.chunks(chunk_size)
    total = len(chunks)
    results = []
    logging.debug("Scanning %d chunks with %d process(es)", total, processes)

    if processes <= 1:
        for i, ch in enumerate(chunks):
            results.append(_unwrap(_run_chunk(function, model, i, ch)))
            if callback:
                callback(i + 1, total, results[-1])
        return results

    pool = multiprocessing.Pool(processes=processes,
                                initializer=_mp_pool_init,
                                initargs=({'model': model, 'function': function},))
    try:
        for i, r in enumerate(pool.imap(multiprocess_scan_chunk, enumerate(chunks))):
            results.append(_unwrap(r))
            if callback:
                callback(i + 1, total, results[-1])
        pool.close()
    finally:
        # If not, dead processes will accumulate in windows
        pool.terminate()
    return results


def console_scan_dataset(title, model, dataset, function, processes=1, verbose=False):
    """ scan_dataset printing the status to console.

    Inputs:
     - title -- Printed above the progress bar
     - verbose -- Boolean, if true it will print a line per chunk instead
                  of a progress bar

    """

    print("\n{0:-^60}".format(' ' + title + ' '))
    total = len(dataset.chunks())
    if not total:
        print("Info: Nothing to scan.")
        return []

    if not verbose:
        pbar = ProgressBar(widgets=[SimpleProgress(), Bar(), AdaptiveETA()],
                           max_value=total).start()

        def callback(done, total, result):
            pbar.update(done)
    else:
        def callback(done, total, result):
            print("Processed chunk {0: <6} {1}/{2}".format(done - 1, done, total))

    results = scan_dataset(model, dataset, function, processes, callback)
    if not verbose:
        pbar.finish()
    return results
