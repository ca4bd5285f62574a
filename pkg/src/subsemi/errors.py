"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line: 2 for invalid
input, 3 for resource caps, 4 for corrupted shard files.
"""


class SubsemiError(Exception):
    exit_code = 1


class ValidationError(SubsemiError, ValueError):
    exit_code = 2


class ResourceCapError(SubsemiError):
    exit_code = 3


class EntryOutOfRange(ValidationError):
    def __init__(self, i, j, value, n):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"entry ({i},{j}) = {value} is outside 1..{n}")


class NonAssociative(ValidationError):
    def __init__(self, i, j, k):
        self.triple = (i, j, k)
        super().__init__(f"(({i}*{j})*{k}) != ({i}*({j}*{k}))")


class NotSquare(ValidationError):
    pass


class PreconditionViolated(ValidationError):
    pass


class SeedNotClosed(ValidationError):
    pass


class NotAnIdeal(ValidationError):
    def __init__(self, s, i):
        self.witness = (s, i)
        super().__init__(f"product of {s} and ideal element {i} leaves the ideal")


class DegreeMismatch(ValidationError):
    pass


class NotAPermutation(ValidationError):
    pass


class RankOutOfRange(ValidationError):
    pass


class ActionNotClosed(ValidationError):
    pass


class SymmetryMismatch(ValidationError):
    pass


class EmptySemigroup(ValidationError):
    pass


class DegreeTooLarge(ResourceCapError):
    pass


class TooLarge(ResourceCapError):
    pass


class TooLargeForCanonicalization(ResourceCapError):
    pass


class CorruptShard(SubsemiError):
    exit_code = 4

    def __init__(self, key, reason):
        self.key = key
        super().__init__(f"shard {key}: {reason}")
