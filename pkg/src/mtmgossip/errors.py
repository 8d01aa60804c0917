"""Exception hierarchy shared by every subsystem."""


class GossipLabError(Exception):
    pass


# graph construction and queries
class GraphError(GossipLabError):
    pass


class OutOfRange(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class InvalidCut(GraphError):
    pass


class TooLarge(GraphError):
    pass


class OverlappingSides(GraphError):
    pass


class InvalidAlpha(GraphError):
    pass


class DisconnectedAfterRetries(GraphError):
    pass


# simulation
class BehaviorViolation(GossipLabError):
    """An algorithm behavior or acceptance policy broke its contract."""


class GuaranteeViolation(GossipLabError):
    """A delay adversary returned a value outside its model bound."""


class FingerprintCollision(GossipLabError):
    """Two distinct token sets produced the same fingerprint during a run."""


# analysis
class CutMissing(GossipLabError):
    pass


class NotMinEdge(GossipLabError):
    pass


# harness
class ConfigError(GossipLabError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
