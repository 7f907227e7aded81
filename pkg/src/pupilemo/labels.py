from enum import IntEnum


class EmotionLabel(IntEnum):
    """The four base emotions. The integer value is the canonical encoding
    used for label ids and confusion-matrix axes."""

    HAPPY = 0
    SAD = 1
    ANGER = 2
    FEAR = 3

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "EmotionLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown emotion token {token!r}") from None

    def __str__(self) -> str:
        return self.token


LABELS = tuple(EmotionLabel)
N_CLASSES = len(LABELS)
TOKENS = tuple(lab.token for lab in LABELS)
