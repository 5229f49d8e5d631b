# Silence numpy/scipy deprecation noise outside of the test suite.
import warnings

warnings.simplefilter('ignore', DeprecationWarning)
warnings.simplefilter('ignore', PendingDeprecationWarning)
