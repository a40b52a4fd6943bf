# Init file for problem backends package
