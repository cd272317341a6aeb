@poppy
def main(xs):
    stack = list(xs)
    out = tuple()
    while len(stack) > 0:
        top = stack.pop()
        out += (score(top),)
        print(f"popped {top}")
    return out

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
