# Artifact export module
