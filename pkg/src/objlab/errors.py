"""Exception hierarchy shared by the store, the connectors and the engine."""


class ObjLabError(Exception):
    pass


class StoreError(ObjLabError):
    pass


class NotFoundError(StoreError, FileNotFoundError):
    """No live object (or container) under the requested name."""


class StoreClosedError(StoreError):
    pass


class UsageError(ObjLabError):
    """API misuse, e.g. sending a chunk on a finished upload."""


class AlreadyExistsError(ObjLabError, FileExistsError):
    pass


class MissingPartError(ObjLabError, ValueError):
    pass


class CorruptManifestError(ObjLabError, ValueError):
    pass


class ConfigError(ObjLabError, ValueError):
    pass
