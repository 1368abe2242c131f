# rieszlab package
