"""trigroove: a desk-scale real-time generative rhythm engine.

A variational groove autoencoder over hit/velocity/offset drum grids, a
triangular latent control space blending two presets with a live-encoded
performance, an online Markov pitch/duration engine, and transport/output
machinery for three playing modes: drums, harmony rhythm driver, and
simulated CV sequencing.
"""

__version__ = "0.1.0"

from .hvo import (GridEvent, HvoPattern, InputBuffer, buffer_add,
                  buffer_snapshot, buffer_sweep, pattern_to_events,
                  quantize_events)
from .latentnav import (AutonomyState, TrianglePos, TriangleRefs,
                        autonomy_step, set_reference_r, triangle_interp)
from .markov import (MarkovTable, NoteEvent, harmonize, observe,
                     sample_duration, sample_pitch)
from .outputs import (CvFrame, CvOnset, ScheduledNote, VoiceGrouping,
                      fit_modulation_curve, group_step, render_cv,
                      schedule_pattern)
from .session import (Preset, Session, SessionConfig, handle_message,
                      load_preset, make_default_preset, run_bar_cycle,
                      save_preset)
from .transport import TransportState, tap, tick
