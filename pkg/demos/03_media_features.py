"""
Media features per call profile
===============================

Decode the caller's RTP stream and look at the frame statistics that the
media layer uses: absolute mean, zero-crossing rate, entropy and silence runs.
"""
import numpy as np

from spitgate.classify_media import classify_media, nn_classify
from spitgate.features import feature_vector, frames, silence_stats
from spitgate.pipeline import caller_stream, default_table, first_invite
from spitgate.traffic_synth import KINDS, CallProfile, synth_call

table = default_table()
print("calibration scale", round(table.scale, 3))

for kind in KINDS:
    call = synth_call(CallProfile(kind, seed=3))
    stream, _ = caller_stream(call, first_invite(call)[1])
    fv = feature_vector(stream.samples, scale=table.scale)
    st = silence_stats(stream)
    print(f"{kind:16s} abs_mean={fv.abs_mean:7.3f} zcr={fv.zcr:.3f} entropy={fv.entropy:.3f} "
          f"silent={st.silence_fraction:.2f} longest_silent={st.longest_silent_run} "
          f"longest_voiced={st.longest_voiced_run}")
    print("   nearest:", nn_classify(fv.abs_mean, table))
    print("   verdict:", classify_media(stream, table).reasons)

# per-frame energy of a genuine call shows the talk spurts
call = synth_call(CallProfile("genuine", seed=3))
stream, _ = caller_stream(call, first_invite(call)[1])
e = (frames(stream) ** 2).mean(axis=1)
print("".join("#" if x >= 1e-4 else "." for x in e[:120]))
print(np.round(e[:8], 5))
