# Python package for random-matrix permanent approximation
