# Tests for qkd-downlink-sim
