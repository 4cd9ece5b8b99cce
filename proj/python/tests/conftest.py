import os
import sys

# Under ctest, import the extension staged in the build tree rather than an
# installed or editable copy.
_stage = os.environ.get("PFGM_STAGE")
if _stage:
    sys.meta_path[:] = [f for f in sys.meta_path if not type(f).__module__.startswith("_editable_skbc_pfgm")]
    sys.path.insert(0, _stage)
    for name in [m for m in sys.modules if m == "pfgm" or m.startswith("pfgm.")]:
        del sys.modules[name]
