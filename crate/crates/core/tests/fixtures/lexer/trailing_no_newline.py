def f():
    if x:
        return 1
    # ends with a comment

    return -1
