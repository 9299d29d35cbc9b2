"""Abstract core operations.

Programs are Python generators that yield op tuples; the engine sends the
op's result (load/pop/read value, or None) back into the generator when the
op completes. The first tuple element is the opcode string; the engine
dispatches on it.

Op costs are defined by the engine and the crossbar latency table, not here.
"""

# Mesh directions for register-to-register links. The four link registers
# map onto these directions in order.
W, E, N, S = "W", "E", "N", "S"
DIRS = (W, E, N, S)
OPPOSITE = {W: E, E: W, N: S, S: N}


def compute(cycles, flops=0):
    """Occupy the core for `cycles` cycles; credit `flops` to the ledger."""
    return ("compute", cycles, flops)


def load(addr):
    """Read one word from `addr` (word address); result sent to the program."""
    return ("load", addr)


def store(addr, word):
    """Write one word to `addr`. Posted: the core moves on once accepted."""
    return ("store", addr, word)


def amo_add(addr, delta):
    """Atomic fetch-and-add on a scratchpad word; returns the old value."""
    return ("amo_add", addr, delta)


def r2r_write(direction, word):
    """Systolic write of one word toward a mesh neighbor."""
    return ("r2r_write", direction, word)


def r2r_read(direction):
    """Systolic read of one word from a mesh neighbor; returns the word."""
    return ("r2r_read", direction)


def barrier(scope="tree"):
    """Join a chip-wide barrier episode; scope is 'tree' or 'centralized'."""
    return ("barrier", scope)


def fifo_push(chan, word):
    """Push one word into the queue-mode channel `chan`."""
    return ("fifo_push", chan, word)


def fifo_pop(chan):
    """Pop one word from the queue-mode channel `chan`; returns the word."""
    return ("fifo_pop", chan)


def mem_copy_in(local_addr, global_addr, n_words):
    """Burst-copy n words from next-level memory into scratchpad space."""
    return ("mem_copy_in", local_addr, global_addr, n_words)


def mem_copy_out(global_addr, local_addr, n_words):
    """Burst-copy n words from scratchpad space out to next-level memory."""
    return ("mem_copy_out", global_addr, local_addr, n_words)


def set_mode(mode_config):
    """Reconfigure the issuing manager's tile (manager only, 2-cycle apply)."""
    return ("set_mode", mode_config)


def flush_line(slice_idx, line_idx):
    """Write back one cache line if dirty (manager only)."""
    return ("flush_line", slice_idx, line_idx)


def flush_slice(slice_idx):
    """Write back every dirty line of one slice (manager only)."""
    return ("flush_slice", slice_idx)


def halt():
    """Stop the core; a program returning normally halts implicitly."""
    return ("halt",)
