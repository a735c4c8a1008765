"""Exception hierarchy."""


class GameError(ValueError):
    """Base class for all errors raised by propshare."""


class ParameterError(GameError):
    """A scalar parameter is outside its valid range."""


class DimensionError(GameError):
    """Array shapes do not agree."""


class IndifferentUserError(GameError):
    """The user places zero weight on every candidate machine."""


class UnboundedMarginalError(GameError):
    """A machine with positive weight has no opposing bids and no reservation."""

    def __init__(self, machine, user=None):
        self.machine = machine
        self.user = user
        who = "" if user is None else f"user {user}: "
        super().__init__(
            f"{who}machine {machine} has zero opposing bids and epsilon=0; "
            "the best response is undefined (set a positive epsilon_reservation)"
        )


class StrategyError(GameError):
    """A strategy update failed during a dynamics run."""

    def __init__(self, user, iteration, cause):
        self.user = user
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"update of user {user} failed at iteration {iteration}: {cause}")
