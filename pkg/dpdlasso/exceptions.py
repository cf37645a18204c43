
class DpdLassoError(Exception):
    pass

class DataError(DpdLassoError):
    pass

class ConstantColumn(DataError):

    def __init__(self, column):
        self.column = column
        super().__init__(f'Column {column} has zero variance')

class NonFiniteInput(DataError):
    pass

class DimensionMismatch(DataError):
    pass

class MissingColumn(DataError):

    def __init__(self, name):
        self.name = name
        super().__init__(f'Response column {name!r} not found in input')

class PTooSmall(DataError):
    pass

class InvalidSampleSize(DataError):
    pass

class NonPositiveSigma(DpdLassoError):
    pass

class GammaZero(DpdLassoError):
    pass

class ZeroWeightInRescaling(DpdLassoError):
    pass

class DegenerateScale(DpdLassoError):
    pass

class ZeroTrueCoefficient(DpdLassoError):
    pass

class DegenerateMad(DpdLassoError):
    pass

class EmptyAfterTrim(DpdLassoError):
    pass

class InvalidScenario(DataError):
    pass
