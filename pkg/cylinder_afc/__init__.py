# Cylinder Active Flow Control
