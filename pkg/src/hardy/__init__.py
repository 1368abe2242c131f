# Calderon-Zygmund sets and Hardy atoms package
