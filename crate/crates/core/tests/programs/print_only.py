@poppy
def main(n):
    for i in range(n):
        print(f"line {i}")
    return n

@sequential
def print(line): ...
