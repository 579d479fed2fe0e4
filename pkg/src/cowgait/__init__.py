"""Locomotion traits and lameness classification from cow keypoint trajectories."""
__version__ = "0.1.0"
