x = "foo"

@poppy
def f():
    print(x)
    x = "bar"

f()

@sequential
def print(line): ...
