from SRC.exception.exception import (
    IndependenceTestException,
    InvalidParameterError,
    MissingNullTableError,
    QuadratureError,
    RejectedInputError,
    TableFormatError,
    UnsupportedStatisticError,
)
