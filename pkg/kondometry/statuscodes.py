SUCCESS = 0
ERROR = 1
RESOURCE_ERROR = 2
