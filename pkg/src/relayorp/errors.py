class RelayOrpError(ValueError):
    """Base class for invalid inputs to the relay placement library."""


class GeometryError(RelayOrpError):
    pass


class TopologyError(RelayOrpError):
    """Malformed or degenerate problem instance."""


class CoincidentNodesError(TopologyError):
    pass
