"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class DataError(ValueError):
    """Input data is non-finite or has the wrong shape."""


class ResolutionError(ValueError):
    """The grid cannot resolve the requested functions or times."""


class ResolutionWarning(UserWarning):
    """Derivative content sits close to the grid cutoff."""


class RangeError(OverflowError):
    """A closed-form evaluation overflowed the floating-point range."""


class EllipticityError(ValueError):
    """A coefficient field fails the uniform ellipticity condition."""


class SolverError(RuntimeError):
    """A linear solve or time step did not meet its tolerance."""


class InsufficientDataError(ValueError):
    """Too few usable samples for a fit."""


class ConfigError(ValueError):
    """One or more configuration entries are invalid.

    ``errors`` holds every problem found, each prefixed by its key path.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
