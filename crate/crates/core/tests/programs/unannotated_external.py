@poppy
def main(xs):
    total = 0
    for x in xs:
        total += audit(x)
        total += score(x)
    return total

def audit(x): ...

@unordered
async def score(prompt): ...
