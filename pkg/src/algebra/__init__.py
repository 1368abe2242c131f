# Asymptotic term algebra package
