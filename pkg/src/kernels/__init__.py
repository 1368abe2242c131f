# Kernel evaluation package
