import hypothesis

# numeric checks here can be slow under coverage or a cold cache; wall-time
# flakiness is not what these properties are about
hypothesis.settings.register_profile(
    "phasekit", deadline=None, max_examples=60, derandomize=True
)
hypothesis.settings.load_profile("phasekit")
