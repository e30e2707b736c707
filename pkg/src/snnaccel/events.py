"""Logical spike events exchanged between the encoder and the runtimes."""

from typing import NamedTuple


class SpikeEvent(NamedTuple):
    """One spike of `neuron` at discrete time step `time`.

    Canonical ordering of an event list is ascending (time, neuron).
    """

    neuron: int
    time: int


def events_sorted(events) -> bool:
    """True if `events` is in canonical (time, neuron) order."""
    return all(
        (a.time, a.neuron) <= (b.time, b.neuron) for a, b in zip(events, events[1:])
    )
