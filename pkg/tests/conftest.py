import sys

# Big-step evaluation recurses along term structure; the fuel budget is
# the real bound, this only keeps CPython's limit out of the way.
sys.setrecursionlimit(20_000)
