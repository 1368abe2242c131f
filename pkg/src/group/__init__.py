# Group arithmetic package
