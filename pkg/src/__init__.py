# mixlab
# Numerical laboratory for mixing of sets on the torus
