class TeltoError(Exception):
    pass


class TopologyError(TeltoError):
    pass


class DuplicateRouteError(TopologyError):
    pass


class TopologyMismatchError(TopologyError):
    pass


class DataError(TeltoError):
    pass


class ConfigError(TeltoError):
    pass


class ShapeError(TeltoError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class TrainingDivergedError(TeltoError):
    """Raised when a loss turns NaN/inf; keeps the last state that was finite."""

    def __init__(self, message: str, last_good_state: dict | None = None, epoch: int = 0) -> None:
        super().__init__(message)
        self.last_good_state = last_good_state
        self.epoch = epoch


class CheckpointError(TeltoError):
    pass
