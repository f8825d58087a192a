"""plumeflow: conditional normalizing-flow inference of CO2 plumes from
time-lapse well and seismic observations, with a desk-scale two-phase flow
simulator and a convolutional imaging proxy."""

__version__ = "0.1.0"
