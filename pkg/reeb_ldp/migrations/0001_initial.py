from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('digest', models.CharField(max_length=64, unique=True)),
                ('command', models.CharField(max_length=64)),
                ('seed_base', models.BigIntegerField(default=0)),
                ('tool_version', models.CharField(max_length=32)),
                ('output_paths', models.JSONField(blank=True, default=list)),
                ('wall_clock', models.FloatField(default=0.0)),
                ('runs', models.PositiveIntegerField(default=1)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('last_run_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'ordering': ['-last_run_at'],
            },
        ),
    ]
