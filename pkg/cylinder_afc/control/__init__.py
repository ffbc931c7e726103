# Sensing, feature lifting and training harness
