x = "foo"

@poppy
def f():
    print(x)

f()

@sequential
def print(line): ...
