# Experiment worker module
