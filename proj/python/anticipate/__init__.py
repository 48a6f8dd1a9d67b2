from ._anticipate import (
    DimensionError,
    InputError,
    IoError,
    NumericError,
    evaluate,
    generate_dataset,
    moc_accuracy,
    predict,
    segments_to_frames,
    softmax,
    tcn_receptive_field,
    train,
    write_default_grammar,
)

__all__ = [
    "DimensionError",
    "InputError",
    "IoError",
    "NumericError",
    "evaluate",
    "generate_dataset",
    "moc_accuracy",
    "predict",
    "segments_to_frames",
    "softmax",
    "tcn_receptive_field",
    "train",
    "write_default_grammar",
]
