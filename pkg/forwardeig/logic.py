from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from util import get_logger

logger = get_logger(__name__)


@dataclass
class Result_ProcessStep:
    status: str = "success"
    result: Optional[Any] = None
    response: Optional[str] = None


class BaseState:
    isFinal = False
    # exceptions a state may raise that end the run instead of propagating
    recoverable = ()

    @classmethod
    def FallbackState(cls):
        return None

    @classmethod
    def step(cls, **kwargs):
        if not cls.isFinal:
            raise NotImplementedError
        return Result_ProcessStep(), cls

    @classmethod
    def safe_step(cls, **kwargs):
        try:
            return cls.step(**kwargs)
        except cls.recoverable as ex:
            logger.warning(f"{cls.__name__} failed: {ex}")
            kwargs["memory"]["error"] = ex
            return (
                Result_ProcessStep(status="error", response=f"{type(ex).__name__}: {ex}"),
                cls.FallbackState(),
            )


@dataclass
class MachineState:
    entry_state: Optional[Any] = None
    current_state: Optional[Any] = None
    memory: Dict = field(default_factory=dict)
    messages: List = field(default_factory=list)
    state_stack: List = field(default_factory=list)


class state_machine:
    MAX_ITER = 1000

    @classmethod
    def reset(cls, mystate, memory=None):
        mystate.current_state = mystate.entry_state
        mystate.memory = dict(memory or {})
        mystate.messages = []
        mystate.state_stack = []

    @classmethod
    def loop(cls, mystate):
        """Run states until a final one is reached; returns the final state class."""
        for _ in range(cls.MAX_ITER):
            response, next_state = mystate.current_state.safe_step(memory=mystate.memory)
            mystate.memory[mystate.current_state.__name__] = response
            if response.response is not None:
                mystate.messages.append(response.response)
            mystate.state_stack.append(mystate.current_state)
            if next_state is None:
                raise RuntimeError(f"{mystate.current_state.__name__} has no successor state")
            mystate.current_state = next_state
            if mystate.current_state.isFinal:
                logger.debug(" -> ".join(s.__name__ for s in mystate.state_stack))
                return mystate.current_state
        raise RuntimeError(f"state machine exceeded {cls.MAX_ITER} transitions")
