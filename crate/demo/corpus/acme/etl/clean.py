# Copyright 2021 Acme Analytics. Licensed under the Apache License 2.0.
import pandas as pd


def load_orders(path):
    df = pd.read_csv(path)
    df = df.dropna(subset=["order_id"])
    df["amount"] = df["amount"].astype(float)
    return df


def daily_totals(df):
    grouped = df.groupby("day")["amount"].sum()
    return grouped.reset_index()


class OrderCleaner:
    def __init__(self, threshold=100):
        self.threshold = threshold

    def large_orders(self, df):
        if df.empty:
            return df
        return df[df["amount"] > self.threshold]
