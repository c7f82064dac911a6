import sys


class IndependenceTestException(Exception):
    exit_code = 1

    def __init__(self, error_message, error_details: sys = sys):
        super().__init__(error_message)
        self.error_message = error_message
        _, _, exc_tb = error_details.exc_info()

        if exc_tb is not None:
            while exc_tb.tb_next is not None:
                exc_tb = exc_tb.tb_next
            self.lineno = exc_tb.tb_lineno
            self.file_name = exc_tb.tb_frame.f_code.co_filename
        else:
            # raised outside an except block: report the raising frame
            frame = sys._getframe(1)
            while frame is not None and frame.f_code.co_filename == __file__:
                frame = frame.f_back
            self.lineno = frame.f_lineno if frame is not None else None
            self.file_name = frame.f_code.co_filename if frame is not None else None

    def __str__(self):
        return "Error occured in python script name [{0}] line number [{1}] error message [{2}]".format(
            self.file_name, self.lineno, str(self.error_message)
        )


class RejectedInputError(IndependenceTestException):
    exit_code = 2


class UnsupportedStatisticError(IndependenceTestException):
    exit_code = 2


class InvalidParameterError(IndependenceTestException):
    exit_code = 2


class TableFormatError(IndependenceTestException):
    exit_code = 2


class MissingNullTableError(IndependenceTestException):
    exit_code = 2


class QuadratureError(IndependenceTestException):
    exit_code = 1
