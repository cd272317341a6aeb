@poppy
def main(prompts):
    count = 0
    def ask(p):
        answer = score(f"{p} #{count}")
        print(f"{p} -> {answer}")
        return answer
    total = 0
    for p in prompts:
        total += ask(p)
        count += 1
    return (total, count)

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
