@poppy
def main(n):
    for i in range(n):
        a = search(f"a{i}")
        b = search(f"b{i}")
        db_write(f"{i}:{a}:{b}")
        score(f"free {i}")
    return search("end")

@readonly
async def search(q): ...

@sequential
async def db_write(row): ...

@unordered
async def score(prompt): ...
