"""Anonymization families: McAdams formant warping and pitch shift + resynthesis."""
from .lpc import LpcFrameModel, levinson_durbin, lpc_analyze
from .mcadams import McAdamsConfig, anonymize_mcadams, mcadams_transform_poles, sample_alpha
from .pitch import PitchShiftConfig, anonymize_pitch, draw_semitones, pitch_shift, time_stretch
from .poles import find_poles, poles_to_coeffs
from .seeding import rng_for, speaker_seed

__all__ = [
    "LpcFrameModel", "McAdamsConfig", "PitchShiftConfig", "anonymize_mcadams", "anonymize_pitch",
    "draw_semitones", "find_poles", "levinson_durbin", "lpc_analyze", "mcadams_transform_poles",
    "pitch_shift", "poles_to_coeffs", "rng_for", "sample_alpha", "speaker_seed", "time_stretch",
]
