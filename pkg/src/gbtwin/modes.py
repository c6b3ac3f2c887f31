"""Names of the three classifier variants."""

GB_TWKSVC = "gb-twksvc"
TWIN_KSVC = "twin-ksvc"
OVR_TSVM = "ovr-tsvm"
MODES = (GB_TWKSVC, TWIN_KSVC, OVR_TSVM)
