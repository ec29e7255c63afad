"""A seconds-long ``evaluate`` configuration for CLI and determinism tests."""

TINY = {
    "evaluate": {
        "train": {"n_clips": 8, "duration_s": 5.0},
        "validation": {"n_clips": 1, "duration_s": 5.0, "hr_range": [60, 100]},
        "test": {"n_clips": 1, "duration_s": 31.0, "hr_range": [60, 100]},
        "physical": {"n_clips": 1, "duration_s": 31.0, "hr_range": [60, 100]},
        "epochs": 1,
        "targets": [60, 120],
        "physical_targets": [120],
        "attack": {"iterations": 2},
    }
}
