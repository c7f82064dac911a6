import pickle

import pytest

from SRC.exception import (
    IndependenceTestException,
    InvalidParameterError,
    QuadratureError,
    RejectedInputError,
    TableFormatError,
)


def test_raise_outside_except_records_caller():
    with pytest.raises(RejectedInputError) as info:
        raise RejectedInputError("no data rows")
    err = info.value
    assert err.file_name == __file__
    assert err.lineno is not None
    assert "no data rows" in str(err)


def test_raise_inside_except_records_failing_line():
    try:
        try:
            int("x")
        except ValueError as e:
            raise InvalidParameterError(str(e))
    except InvalidParameterError as err:
        assert err.file_name == __file__
        assert "invalid literal" in err.error_message


@pytest.mark.parametrize(
    "cls, code",
    [(RejectedInputError, 2), (InvalidParameterError, 2), (TableFormatError, 2), (QuadratureError, 1)],
)
def test_exit_codes(cls, code):
    assert issubclass(cls, IndependenceTestException)
    assert cls.exit_code == code


def test_exceptions_survive_pickling():
    err = pickle.loads(pickle.dumps(RejectedInputError("bad row")))
    assert isinstance(err, RejectedInputError)
    assert err.error_message == "bad row"
